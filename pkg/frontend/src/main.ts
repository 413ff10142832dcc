/** Browser wiring: upload, sliders, live gallery, before/after compare. */

import { ApiError, Client, Plan, TransformResponse } from "./api.js";
import { PreviewScheduler } from "./preview.js";
import {
  CHANNELS,
  SliderState,
  distribution,
  initialState,
  normalizeSliders,
  toggleLock,
} from "./sliders.js";

const client = new Client();
let state: SliderState = initialState();
let imageB64: string | null = null;
let lastTransform: { digest: string; result: TransformResponse } | null = null;

const $ = (id: string) => document.getElementById(id)!;

function setBanner(message: string | null) {
  const banner = $("banner");
  banner.textContent = message ?? "";
  banner.classList.toggle("hidden", message === null);
}

function renderSliders() {
  const host = $("sliders");
  host.innerHTML = "";
  CHANNELS.forEach((channel, i) => {
    const row = document.createElement("div");
    row.className = "slider-row";

    const label = document.createElement("label");
    label.textContent = `${channel} ${(state.values[i] * 100).toFixed(1)}%`;

    const input = document.createElement("input");
    input.type = "range";
    input.min = "0";
    input.max = "1";
    input.step = "0.01";
    input.value = String(state.values[i]);
    input.disabled = state.locks[i];
    input.addEventListener("input", () => {
      state = normalizeSliders(state, i, Number(input.value));
      renderSliders();
      setBanner(state.warning);
      requestPreview();
    });

    const lock = document.createElement("input");
    lock.type = "checkbox";
    lock.checked = state.locks[i];
    lock.title = "lock channel";
    lock.addEventListener("change", () => {
      state = toggleLock(state, i);
      renderSliders();
    });

    row.append(label, input, lock);
    host.append(row);
  });
}

function renderGallery(plan: Plan) {
  setBanner(null);
  const host = $("gallery");
  host.innerHTML = "";
  for (const target of plan.targets) {
    const card = document.createElement("figure");
    card.className = "target-card";
    const img = document.createElement("img");
    img.src = target.thumbnail ?? "";
    img.alt = target.id;
    const caption = document.createElement("figcaption");
    caption.textContent = `${target.id} bc=${target.bc.toFixed(3)} w=${target.weight.toFixed(3)}`;
    card.append(img, caption);
    host.append(card);
  }
}

const scheduler = new PreviewScheduler(
  (request) => client.preview(request),
  {
    onPlan: renderGallery,
    onError: (message) => setBanner(message), // last good gallery is retained
  },
  300,
);

function requestPreview() {
  if (!imageB64) return;
  scheduler.request({ image_b64: imageB64, emotion: distribution(state) });
}

function renderComparison(result: TransformResponse) {
  const after = $("after") as HTMLImageElement;
  after.src = `data:image/png;base64,${result.image_b64}`;
  $("compare").classList.remove("hidden");
  const divider = $("divider") as HTMLInputElement;
  divider.oninput = () => {
    after.style.clipPath = `inset(0 ${100 - Number(divider.value)}% 0 0)`;
  };
  $("plan-json").textContent = JSON.stringify(result.plan, null, 2);
}

async function runTransform() {
  if (!imageB64) {
    setBanner("upload an image first");
    return;
  }
  // repeated clicks with unchanged state reuse the previous result
  const preview = await client.preview({ image_b64: imageB64, emotion: distribution(state) });
  if (lastTransform && lastTransform.digest === preview.plan.histogram_digest) {
    renderComparison(lastTransform.result);
    return;
  }
  try {
    const result = await client.transform({ image_b64: imageB64, emotion: distribution(state) });
    lastTransform = { digest: result.plan.histogram_digest, result };
    renderComparison(result);
  } catch (err) {
    if (err instanceof ApiError && err.field) {
      setBanner(`${err.field}: ${err.message}`);
    } else {
      setBanner(err instanceof Error ? err.message : String(err));
    }
  }
}

function init() {
  renderSliders();

  const upload = $("upload") as HTMLInputElement;
  upload.addEventListener("change", () => {
    const file = upload.files?.[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => {
      const dataUrl = reader.result as string;
      imageB64 = dataUrl.slice(dataUrl.indexOf(",") + 1);
      ($("before") as HTMLImageElement).src = dataUrl;
      requestPreview();
    };
    reader.readAsDataURL(file);
  });

  $("transform").addEventListener("click", () => void runTransform());

  client
    .stats()
    .then((s) => setBanner(`database loaded: ${s.records} images`))
    .catch(() => setBanner("database not loaded"));
}

init();
