import { mount } from "./app.js";

const base = new URLSearchParams(location.search).get("service")
  ?? location.origin;
mount(document.getElementById("app")!, base);
