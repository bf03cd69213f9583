import { ApiClient } from "./api.js";
import { Dashboard } from "./app.js";

const DEFAULT_API = "http://127.0.0.1:8080/api/v1";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return (override ?? DEFAULT_API).replace(/\/$/, "");
}

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount element");
}
new Dashboard(root, new ApiClient(apiBase())).start();
