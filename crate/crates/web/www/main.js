import init, { demo_song, analyze, infill } from "./pkg/infillkit_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#d0553f", "#3f6fd0", "#3fa362"];
const METRICS = ["density", "polyphony", "occupation"];

const state = {
  midi: null,       // committed file
  proposal: null,   // {midi, view} while a result is pending
  view: null,
  selected: new Set(),
  tension: [],      // per bar: level or null
};

function status(text, error = false) {
  $("status").textContent = text;
  $("status").className = error ? "error" : "";
}

function shown() {
  return state.proposal ? state.proposal.view : state.view;
}

function run() {
  if (!state.midi) return;
  try {
    state.view = JSON.parse(analyze(state.midi, $("roles").value, Number($("start").value)));
    state.selected.clear();
    state.tension = new Array(state.view.bars).fill(null);
    buildLevels();
    draw();
    const s = state.view.summary;
    $("summary").textContent =
      `${s.track_count} tracks, ${s.bar_count} bars, ${s.metre.numerator}/${s.metre.denominator}, ` +
      `${s.tempo_bpm.toFixed(1)} bpm, window key ${state.view.key}`;
    status("");
  } catch (e) {
    status(String(e.message || e), true);
  }
}

function buildLevels() {
  const table = $("levels");
  table.innerHTML = "<tr><td></td><td>set</td>" + METRICS.map((m) => `<td>${m}</td>`).join("") + "</tr>";
  state.view.tracks.forEach((t, i) => {
    const row = document.createElement("tr");
    row.innerHTML =
      `<td style="color:${COLORS[i]}">${i}: ${t.role}</td><td><input type="checkbox" id="use-${i}"></td>` +
      METRICS.map((m) => `<td><input type="range" min="0" max="9" value="${state.view.levels[i][0][m]}" id="${m}-${i}">` +
        `<span id="${m}-${i}-v">${state.view.levels[i][0][m]}</span></td>`).join("");
    table.appendChild(row);
    METRICS.forEach((m) => {
      $(`${m}-${i}`).oninput = (e) => { $(`${m}-${i}-v`).textContent = e.target.value; };
    });
  });
}

function geometry(canvas, view) {
  const left = 60;
  return { left, bw: (canvas.width - left - 10) / view.bars, lane: (canvas.height - 10) / view.tracks.length };
}

function draw() {
  const view = shown();
  if (!view) return;
  const roll = $("roll"), ctx = roll.getContext("2d");
  const g = geometry(roll, view);
  ctx.clearRect(0, 0, roll.width, roll.height);
  ctx.font = "11px sans-serif";
  view.tracks.forEach((t, ti) => {
    const top = 5 + ti * g.lane;
    ctx.fillStyle = COLORS[ti];
    ctx.fillText(t.role, 4, top + g.lane / 2);
    for (let b = 0; b < view.bars; b++) {
      const x = g.left + b * g.bw;
      if (state.selected.has(`${ti}:${b}`)) {
        ctx.fillStyle = "rgba(255, 200, 0, 0.3)";
        ctx.fillRect(x, top, g.bw, g.lane);
      }
      ctx.strokeStyle = "#ddd";
      ctx.strokeRect(x, top, g.bw, g.lane);
      const l = view.levels[ti][b];
      ctx.fillStyle = "#888";
      ctx.fillText(`${l.density}${l.polyphony}${l.occupation}`, x + 2, top + g.lane - 3);
    }
    const notes = t.notes.concat(t.carried);
    if (!notes.length) return;
    const lo = Math.min(...notes.map((n) => n.pitch)), hi = Math.max(...notes.map((n) => n.pitch));
    const span = Math.max(hi - lo, 12), tickW = g.bw / view.bar_ticks;
    ctx.fillStyle = COLORS[ti];
    for (const n of notes) {
      const y = top + 4 + (1 - (n.pitch - lo) / span) * (g.lane - 18);
      ctx.fillRect(g.left + n.onset * tickW, y, Math.max(n.duration * tickW - 1, 1), 3);
    }
  });

  const lane = $("tension"), tc = lane.getContext("2d");
  tc.clearRect(0, 0, lane.width, lane.height);
  const h = lane.height - 20, y = (level) => 5 + h - (level / 9) * h;
  tc.strokeStyle = "#555";
  tc.beginPath();
  view.tension.forEach((t, b) => {
    const x = g.left + (b + 0.5) * g.bw;
    b ? tc.lineTo(x, y(t.tension_level)) : tc.moveTo(x, y(t.tension_level));
  });
  tc.stroke();
  tc.fillStyle = "#d08f00";
  state.tension.forEach((level, b) => {
    if (level !== null) tc.fillRect(g.left + (b + 0.5) * g.bw - 4, y(level) - 4, 8, 8);
  });
  tc.fillStyle = "#888";
  tc.fillText("tension", 4, 15);
  for (let b = 0; b < view.bars; b++) tc.fillText(String(view.origin_bar + b), g.left + b * g.bw + 2, lane.height - 3);
  document.body.classList.toggle("proposal", !!state.proposal);
}

$("roll").onclick = (e) => {
  const view = shown();
  if (!view || state.proposal) return;
  const g = geometry($("roll"), view);
  const b = Math.floor((e.offsetX - g.left) / g.bw), t = Math.floor((e.offsetY - 5) / g.lane);
  if (b < 0 || b >= view.bars || t < 0 || t >= view.tracks.length) return;
  const key = `${t}:${b}`;
  state.selected.has(key) ? state.selected.delete(key) : state.selected.add(key);
  draw();
};

$("tension").onclick = (e) => {
  const view = shown();
  if (!view || state.proposal) return;
  const g = geometry($("tension"), view);
  const b = Math.floor((e.offsetX - g.left) / g.bw);
  if (b < 0 || b >= view.bars) return;
  const h = $("tension").height - 20;
  const level = Math.max(0, Math.min(9, Math.round(((5 + h - e.offsetY) / h) * 9)));
  state.tension[b] = e.shiftKey ? null : level;
  draw();
};

$("demo").onclick = () => {
  state.midi = demo_song(Number($("demo-seed").value));
  state.proposal = null;
  run();
};

$("file").onchange = async (e) => {
  const f = e.target.files[0];
  if (!f) return;
  state.midi = new Uint8Array(await f.arrayBuffer());
  state.proposal = null;
  run();
};

$("analyze").onclick = run;

$("infill").onclick = () => {
  if (!state.view || state.proposal) return;
  const cells = [...state.selected].map((k) => {
    const [track, bar] = k.split(":").map(Number);
    return { track, bar };
  });
  const tracks = state.view.tracks.map((_, i) => $(`use-${i}`).checked
    ? Object.fromEntries(METRICS.map((m) => [m, Number($(`${m}-${i}`).value)]))
    : null);
  const request = { cells, target: { tracks, tension: state.tension }, seed: Number($("seed").value) };
  try {
    const out = JSON.parse(infill(state.midi, $("roles").value, Number($("start").value), JSON.stringify(request)));
    state.proposal = { midi: Uint8Array.from(atob(out.midi), (c) => c.charCodeAt(0)), view: out.view };
    const off = out.cells.filter((c) => METRICS.some((m) => Math.abs(c.target[m] - c.achieved[m]) > 1)).length;
    status(`${out.cells.length} cell(s) regenerated, ${off} off target by more than one level. Keep or discard.`);
    $("keep").disabled = $("discard").disabled = false;
    draw();
  } catch (e) {
    status(String(e.message || e), true);
  }
};

function resolve(keep) {
  if (!state.proposal) return;
  if (keep) state.midi = state.proposal.midi;
  state.proposal = null;
  $("keep").disabled = $("discard").disabled = true;
  run();
  status(keep ? "kept" : "discarded");
}

$("keep").onclick = () => resolve(true);
$("discard").onclick = () => resolve(false);

$("download").onclick = () => {
  const bytes = state.proposal ? state.proposal.midi : state.midi;
  if (!bytes) return;
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([bytes], { type: "audio/midi" }));
  a.download = "infilled.mid";
  a.click();
};

await init();
state.midi = demo_song(1);
run();
