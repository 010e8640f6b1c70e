import init, { solve, cluster_graphs, verify } from "./pkg/purgemerge_web.js";

const $ = (id) => document.getElementById(id);
let last = null;

function sideOf(names) {
  const n = Math.round(Math.sqrt(names.length));
  return n * n === names.length && names[0] === "r1c1" ? n : 0;
}

function renderBoard(view, step) {
  const board = $("board");
  board.replaceChildren();
  const cells = step < view.candidates.length
    ? view.candidates[step]
    : view.solutions[0].map((v) => [v]);
  const n = sideOf(view.names);
  if (!n) {
    const pre = document.createElement("pre");
    pre.textContent = view.names.map((name, i) => `${name}: {${cells[i].join(", ")}}`).join("\n");
    board.append(pre);
    return;
  }
  const box = Math.round(Math.sqrt(n));
  const table = document.createElement("table");
  table.className = "grid";
  for (let r = 0; r < n; r++) {
    const tr = table.insertRow();
    for (let c = 0; c < n; c++) {
      const td = tr.insertCell();
      const values = cells[r * n + c];
      td.className = values.length === 1 ? "solved" : "open";
      if (c % box === 0) td.classList.add("bl");
      if (r % box === 0) td.classList.add("bt");
      td.textContent = values.join(values.length === 1 ? "" : " ");
    }
  }
  board.append(table);
}

function renderStats(view) {
  const cols = ["round", "threshold", "clusters", "max_table_entries", "messages", "entries_purged", "values_removed", "vars_solved", "is_tree"];
  const table = document.createElement("table");
  table.className = "stats";
  const head = table.insertRow();
  for (const c of cols) {
    const th = document.createElement("th");
    th.textContent = c;
    head.append(th);
  }
  for (const r of view.rounds) {
    const tr = table.insertRow();
    for (const c of cols) {
      const v = r[c];
      tr.insertCell().textContent = typeof v === "number" && !Number.isInteger(v) ? v.toFixed(2) : String(v);
    }
  }
  $("stats").replaceChildren(table);
}

function showStep() {
  const step = Number($("round").value);
  const rounds = last.candidates.length - 1;
  $("round-label").textContent = step === 0 ? "0 (encoded)" : step > rounds ? "solution" : String(step);
  renderBoard(last, step);
}

$("solve").addEventListener("click", () => {
  const started = performance.now();
  const view = JSON.parse(solve($("puzzle").value, $("metric").value));
  const ms = (performance.now() - started).toFixed(0);
  $("graph").hidden = true;
  if (view.error) {
    $("status").className = "bad";
    $("status").textContent = view.error;
    $("stepper").hidden = true;
    $("board").replaceChildren();
    $("stats").replaceChildren();
    return;
  }
  last = view;
  $("status").className = "";
  const count = view.solutions.length + (view.truncated ? "+" : "");
  const note = view.message ? ` (${view.message})` : "";
  $("status").textContent =
    `${view.outcome}${note}: ${count} solution(s), ${view.rounds.length} round(s), peak table ${view.peak_table_entries} entries, ${ms} ms`;
  const steps = view.candidates.length - 1 + (view.solutions.length ? 1 : 0);
  $("round").max = String(steps);
  $("round").value = String(steps);
  $("stepper").hidden = false;
  if (view.solutions.length) {
    const sol = view.solutions[0];
    $("candidate").value = sol.join(sol.every((v) => v < 10) ? "" : " ");
  }
  showStep();
  renderStats(view);
});

$("round").addEventListener("input", showStep);

$("graphs").addEventListener("click", () => {
  const out = JSON.parse(cluster_graphs($("puzzle").value, $("metric").value));
  const pre = $("graph");
  pre.hidden = false;
  if (!out.rounds) {
    pre.textContent = out.error;
    return;
  }
  const lines = [];
  for (const g of out.rounds) {
    lines.push(`round ${g.round}: ${g.clusters.length} clusters, ${g.edges.length} edges${g.is_tree ? ", tree" : ""}`);
    g.clusters.forEach((s, i) => lines.push(`  C${i} {${s.join(" ")}}`));
    for (const e of g.edges) lines.push(`  C${e.a} -- C${e.b} [${e.sepset.join(" ")}]`);
  }
  if (out.error) lines.push(`stopped: ${out.error}`);
  pre.textContent = lines.join("\n");
});

$("verify").addEventListener("click", () => {
  const r = JSON.parse(verify($("puzzle").value, $("candidate").value));
  const verdict = $("verdict");
  verdict.className = r.valid ? "good" : "bad";
  verdict.textContent = r.error ?? (r.valid ? "valid" : `invalid: ${r.reason}`);
});

await init();
