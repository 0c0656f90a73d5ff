// Browser entry point.  The API origin defaults to the page's own origin;
// override with ?api=http://host:port when the service runs elsewhere.

import { Api } from "./api.js";
import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const root = document.getElementById("app");

if (root) {
  createApp(root, new Api(base), window.sessionStorage).catch((err) => {
    root.textContent = `failed to start: ${err}`;
  });
}
