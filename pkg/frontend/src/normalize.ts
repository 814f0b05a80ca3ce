/** Sentence-normalization view: input, normalized output, per-token table. */
import { ApiError, TokenRecord, normalizeText } from "./api.js";

function tokenRow(token: TokenRecord): HTMLTableRowElement {
  const row = document.createElement("tr");
  row.className = token.is_nsw ? "token-row nsw" : "token-row";

  const source = document.createElement("td");
  source.textContent = token.source;
  row.appendChild(source);

  const prediction = document.createElement("td");
  prediction.textContent = token.prediction;
  row.appendChild(prediction);

  const flag = document.createElement("td");
  flag.textContent = token.is_nsw ? "NSW" : "";
  row.appendChild(flag);

  const confidence = document.createElement("td");
  confidence.className = "confidence";
  const bar = document.createElement("div");
  bar.className = "confidence-bar";
  bar.style.width = `${Math.round(token.confidence * 100)}%`;
  confidence.appendChild(bar);
  const value = document.createElement("span");
  value.textContent = token.confidence.toFixed(2);
  confidence.appendChild(value);
  row.appendChild(confidence);

  return row;
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

export function renderNormalizeView(container: HTMLElement): void {
  container.innerHTML = `
    <h2>Sentence normalization</h2>
    <form id="normalize-form">
      <textarea id="normalize-input" rows="3"
                placeholder="noisy sentence, e.g. ko bik j het"></textarea>
      <button id="normalize-submit" type="submit">Normalize</button>
    </form>
    <p id="normalized-output"></p>
    <table id="token-table">
      <thead>
        <tr><th>source</th><th>prediction</th><th>NSW</th><th>confidence</th></tr>
      </thead>
      <tbody></tbody>
    </table>
  `;

  const form = container.querySelector("#normalize-form") as HTMLFormElement;
  const input = container.querySelector(
    "#normalize-input",
  ) as HTMLTextAreaElement;
  const output = container.querySelector("#normalized-output") as HTMLElement;
  const tbody = container.querySelector(
    "#token-table tbody",
  ) as HTMLTableSectionElement;

  let requestSeq = 0;

  async function run(sentence: string): Promise<void> {
    const seq = ++requestSeq;
    output.textContent = "Normalizing…";
    try {
      const response = await normalizeText(sentence);
      if (seq !== requestSeq) return; // superseded by a newer submission
      container.querySelector(".error-banner")?.remove();
      output.textContent = response.normalized;
      tbody.innerHTML = "";
      for (const token of response.tokens) {
        tbody.appendChild(tokenRow(token));
      }
    } catch (err) {
      if (seq !== requestSeq) return;
      const message =
        err instanceof ApiError
          ? `Normalization failed: ${err.message}`
          : "Normalization failed: service unreachable";
      // error banner replaces any partial render
      output.textContent = "";
      tbody.innerHTML = "";
      container.querySelector(".error-banner")?.remove();
      container.appendChild(errorBanner(message, () => run(sentence)));
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void run(input.value); // sent verbatim; empty sentences are permitted
  });
}
