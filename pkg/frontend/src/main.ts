import { ApiClient } from "./api";
import { renderAnswer, renderError, renderUserTurn } from "./render";

const BASE_URL = (window as any).OCEANQUERY_BASE_URL ?? "";

const history = document.getElementById("history") as HTMLDivElement;
const form = document.getElementById("query-form") as HTMLFormElement;
const input = document.getElementById("query-input") as HTMLInputElement;
const send = document.getElementById("send") as HTMLButtonElement;

const client = new ApiClient(BASE_URL);

function append(html: string): void {
  const wrapper = document.createElement("div");
  wrapper.innerHTML = html;
  // history is append-only within a session; reloading clears it
  history.append(...Array.from(wrapper.children));
  history.scrollTop = history.scrollHeight;
}

form.addEventListener("submit", async (ev) => {
  ev.preventDefault();
  const text = input.value.trim();
  if (!text) return;

  append(renderUserTurn(text));
  input.value = "";
  // one in-flight query at a time
  input.disabled = true;
  send.disabled = true;
  try {
    const result = await client.query(text);
    if (result.ok) {
      append(renderAnswer(result.answer, BASE_URL));
    } else {
      append(renderError(result.error));
      if (result.status === 0) {
        const retry = document.createElement("button");
        retry.textContent = "retry";
        retry.className = "retry";
        retry.onclick = () => {
          retry.remove();
          input.value = text;
          form.requestSubmit();
        };
        history.append(retry);
      }
    }
  } finally {
    input.disabled = false;
    send.disabled = false;
    input.focus();
  }
});

client.health().then((h) => {
  const badge = document.getElementById("health");
  if (badge) {
    badge.textContent = h
      ? `connected (${h.corpus_size} corpus chunks)`
      : "backend unreachable";
  }
});
