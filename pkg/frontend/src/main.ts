import { ApiClient } from "./api.js";
import { App } from "./app.js";

const base =
  new URLSearchParams(window.location.search).get("api") ??
  window.location.origin;
const app = new App(document.getElementById("app")!, new ApiClient(base));
void app.start();
