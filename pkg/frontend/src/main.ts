/** Hash router wiring the two views into the page shell. */
import { renderLookupView } from "./lookup.js";
import { renderNormalizeView } from "./normalize.js";

const routes: Record<string, (container: HTMLElement) => void> = {
  "#/lookup": renderLookupView,
  "#/normalize": renderNormalizeView,
};

export function route(): void {
  const container = document.getElementById("view");
  if (!container) return;
  const render = routes[window.location.hash] ?? renderLookupView;
  render(container);
  for (const link of document.querySelectorAll("nav a")) {
    link.classList.toggle(
      "active",
      link.getAttribute("href") === window.location.hash,
    );
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", () => {
  if (!window.location.hash) window.location.hash = "#/lookup";
  route();
});
