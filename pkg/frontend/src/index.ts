/** Bundle entry: mount the widget once the report document is ready. */

import { mount } from "./dom";

function boot(): void {
  try {
    mount(document);
  } catch (err) {
    // a report without the island or container renders fine without a widget
    console.warn(`rating widget not mounted: ${(err as Error).message}`);
  }
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
