import { Api } from "./api.js";
import { App } from "./app.js";

// Same-origin by default (serve the built files behind the API server);
// override with <meta name="api-base" content="http://host:port">.
const meta = document.querySelector('meta[name="api-base"]');
const baseUrl = meta?.getAttribute("content") ?? "";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

new App(new Api(baseUrl), root).start();
