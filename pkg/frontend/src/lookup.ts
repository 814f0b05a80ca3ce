/** Dictionary-lookup view: word form, result card, fallback badge. */
import { ApiError, DictEntry, lookupWord } from "./api.js";

function entryCard(entry: DictEntry): HTMLElement {
  const card = document.createElement("div");
  card.className = "entry-card";

  const forms = document.createElement("p");
  forms.className = "standard-forms";
  forms.textContent = entry.standard_forms.join(", ");
  card.appendChild(forms);

  const definition = document.createElement("p");
  definition.className = "definition";
  definition.textContent = entry.definition;
  card.appendChild(definition);

  const examples = document.createElement("ul");
  examples.className = "examples";
  for (const example of entry.examples) {
    const item = document.createElement("li");
    item.textContent = example;
    examples.appendChild(item);
  }
  card.appendChild(examples);

  const source = document.createElement("span");
  source.className = `source-badge source-${entry.source}`;
  source.textContent = entry.source;
  card.appendChild(source);

  return card;
}

function errorBanner(message: string, retry: () => void): HTMLElement {
  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.setAttribute("role", "alert");
  const text = document.createElement("span");
  text.textContent = message;
  banner.appendChild(text);
  const button = document.createElement("button");
  button.className = "retry";
  button.textContent = "Retry";
  button.addEventListener("click", retry);
  banner.appendChild(button);
  return banner;
}

export function renderLookupView(container: HTMLElement): void {
  container.innerHTML = `
    <h2>NSW dictionary lookup</h2>
    <form id="lookup-form">
      <input id="lookup-input" type="text" autocomplete="off"
             placeholder="non-standard word, e.g. ko" />
      <button id="lookup-submit" type="submit" disabled>Look up</button>
    </form>
    <div id="lookup-result" aria-live="polite"></div>
  `;

  const form = container.querySelector("#lookup-form") as HTMLFormElement;
  const input = container.querySelector("#lookup-input") as HTMLInputElement;
  const submit = container.querySelector("#lookup-submit") as HTMLButtonElement;
  const result = container.querySelector("#lookup-result") as HTMLElement;

  // empty (after trimming) input disables submission
  input.addEventListener("input", () => {
    submit.disabled = input.value.trim() === "";
  });

  let requestSeq = 0;

  async function run(word: string): Promise<void> {
    const seq = ++requestSeq;
    result.innerHTML = '<p class="loading">Looking up…</p>';
    try {
      const response = await lookupWord(word);
      if (seq !== requestSeq) return; // superseded by a newer submission
      result.innerHTML = "";
      if (!response.found) {
        const miss = document.createElement("p");
        miss.className = "not-found";
        miss.textContent = `No entry for “${response.word}”.`;
        result.appendChild(miss);
        return;
      }
      if (response.was_fallback) {
        const badge = document.createElement("span");
        badge.className = "fallback-badge";
        badge.textContent = "added via LLM fallback";
        result.appendChild(badge);
      }
      for (const entry of response.entries) {
        result.appendChild(entryCard(entry));
      }
    } catch (err) {
      if (seq !== requestSeq) return;
      const message =
        err instanceof ApiError
          ? `Lookup failed: ${err.message}`
          : "Lookup failed: service unreachable";
      result.innerHTML = "";
      result.appendChild(errorBanner(message, () => run(word)));
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const word = input.value.trim();
    if (word !== "") void run(word);
  });
}
