// Workbench shell: tab bar, status strip, error banner, and session
// rehydration.  A page refresh restores the exact same view because nothing
// model-related lives outside the server — we stash only the session id and
// read everything back from it.

import { Api } from "./api.js";
import { Store, TabName } from "./state.js";
import { clear, el } from "./dom.js";
import { shortId } from "./format.js";
import { mountUpload } from "./upload.js";
import { mountSelect } from "./select.js";
import { mountPlots } from "./plots.js";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export interface AppContext {
  api: Api;
  store: Store;
  storage: StorageLike;
  root: HTMLElement;
  /** Wrap view event handlers so tests can await quiescence. */
  track<T>(work: Promise<T>): Promise<T | undefined>;
  whenIdle(): Promise<void>;
}

export const STORAGE_KEY = "cegforge-session";

const TABS: { name: TabName; label: string }[] = [
  { name: "upload", label: "Upload Data" },
  { name: "select", label: "Select Data" },
  { name: "plots", label: "Plots" },
];

export async function createApp(
  root: HTMLElement,
  api: Api,
  storage: StorageLike,
): Promise<AppContext> {
  const store = new Store();
  let pending = 0;

  const ctx: AppContext = {
    api,
    store,
    storage,
    root,
    track<T>(work: Promise<T>): Promise<T | undefined> {
      pending += 1;
      return work
        .catch((err) => {
          store.fail(err);
          return undefined;
        })
        .finally(() => {
          pending -= 1;
        });
    },
    async whenIdle(): Promise<void> {
      while (pending > 0) {
        await new Promise((resolve) => setTimeout(resolve, 5));
      }
      await new Promise((resolve) => setTimeout(resolve, 0));
    },
  };

  clear(root);
  root.classList.add("cegforge-app");

  const tabBar = el("nav", { class: "tab-bar" });
  for (const tab of TABS) {
    tabBar.append(
      el(
        "button",
        {
          class: "tab-button",
          "data-tab": tab.name,
          onclick: () => store.update({ tab: tab.name }),
        },
        [tab.label],
      ),
    );
  }

  const statusStrip = el("div", { class: "status-strip" });
  const errorBanner = el("div", { class: "error-banner", hidden: true });

  const panels: Record<TabName, HTMLElement> = {
    upload: el("section", { class: "panel", "data-panel": "upload" }),
    select: el("section", { class: "panel", "data-panel": "select" }),
    plots: el("section", { class: "panel", "data-panel": "plots" }),
  };

  root.append(
    el("header", { class: "app-header" }, [
      el("h1", {}, ["cegforge workbench"]),
      tabBar,
      statusStrip,
    ]),
    errorBanner,
    panels.upload,
    panels.select,
    panels.plots,
  );

  mountUpload(panels.upload, ctx);
  mountSelect(panels.select, ctx);
  mountPlots(panels.plots, ctx);

  function renderChrome(): void {
    const s = store.state;
    for (const tab of TABS) {
      const button = tabBar.querySelector<HTMLButtonElement>(`[data-tab="${tab.name}"]`)!;
      button.classList.toggle("active", s.tab === tab.name);
      panels[tab.name].hidden = s.tab !== tab.name;
    }

    clear(statusStrip);
    statusStrip.append(
      el("span", { class: "session-id", title: s.sessionId ?? "" }, [
        `session ${shortId(s.sessionId)}`,
      ]),
      el("span", { class: "revision" }, [`revision ${s.revision}`]),
    );
    for (const [name, ready] of Object.entries(s.artifacts)) {
      statusStrip.append(
        el("span", { class: `artifact-chip ${ready ? "ready" : "missing"}`, "data-artifact": name }, [
          name,
        ]),
      );
    }

    errorBanner.hidden = !s.error;
    clear(errorBanner);
    if (s.error) {
      errorBanner.append(el("span", { class: "error-text" }, [s.error]));
      if (s.conflict) {
        errorBanner.append(
          el(
            "button",
            {
              class: "reload-button",
              onclick: () => ctx.track(refreshSession(ctx)),
            },
            ["Reload session"],
          ),
        );
      }
    }
  }

  store.subscribe(renderChrome);

  await ctx.track(rehydrate(ctx));
  renderChrome();
  return ctx;
}

/** Re-read the server's view of the session after a conflict or refresh. */
export async function refreshSession(ctx: AppContext): Promise<void> {
  const sid = ctx.store.state.sessionId;
  if (!sid) return;
  ctx.store.applyEnvelope(await ctx.api.getSession(sid));
  if (ctx.store.state.artifacts.dataset) {
    const resp = await ctx.api.getDataset(sid);
    ctx.store.update({ dataset: resp.dataset });
  }
}

async function rehydrate(ctx: AppContext): Promise<void> {
  const { api, store, storage } = ctx;
  const remembered = storage.getItem(STORAGE_KEY);
  if (remembered) {
    try {
      store.applyEnvelope(await api.getSession(remembered));
      if (store.state.artifacts.dataset) {
        const resp = await api.getDataset(remembered);
        store.update({ dataset: resp.dataset });
      }
    } catch {
      storage.removeItem(STORAGE_KEY);
    }
  }
  if (!store.state.sessionId) {
    store.applyEnvelope(await api.createSession());
  }
  storage.setItem(STORAGE_KEY, store.state.sessionId!);
}
