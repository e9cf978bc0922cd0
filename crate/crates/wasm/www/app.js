import init, { rank_json, explain_json, run_json } from "./pkg/layerrank_wasm.js";

const WORKED = {
  scores: {
    a: { s1: 3, s2: 1 },
    b: { s1: 3, s2: 2 },
    c: { s1: 2, s2: 9 },
    d: { s1: 1, s2: 0 },
  },
  slots: [{ thoughts: [{ id: "s1" }] }, { thoughts: [{ id: "s2" }] }],
  k: 2,
};

const CIVIL_CONFIG = {
  "query": "Can a contract concluded by a minor without parental consent be rescinded?",
  "mode": "replay",
  "layers": [
    {
      "name": "KFL",
      "metric": {
        "at_least_k": 1
      },
      "levels": [
        [
          {
            "id": "kw1",
            "criterion": "mentions a minor",
            "binary": true
          },
          {
            "id": "kw2",
            "criterion": "mentions rescission",
            "binary": true
          }
        ]
      ]
    },
    {
      "name": "SFL",
      "metric": "max_count",
      "levels": [
        [
          {
            "id": "g1",
            "criterion": "The article addresses contracts or other juridical acts.",
            "binary": true
          },
          {
            "id": "g2",
            "criterion": "The article describes a legal consequence that affects an existing contract or act.",
            "binary": true
          }
        ],
        [
          {
            "id": "s1",
            "criterion": "The article refers to a party other than the actor, such as a legal representative or the counterparty.",
            "binary": true
          }
        ]
      ]
    },
    {
      "name": "FCL",
      "metric": "all",
      "levels": [
        [
          {
            "id": "q1",
            "criterion": "The article states a condition under which a contract or act may be cancelled or voided.",
            "binary": true
          }
        ]
      ]
    }
  ]
};

const CIVIL_CORPUS = "{\"id\":\"art1\",\"text\":\"A juridical act performed by a minor without the consent of a legal representative is voidable.\",\"meta\":{\"article\":5}}\n{\"id\":\"art2\",\"text\":\"The rescission of a contract is effected by a manifestation of intention to the other party.\",\"meta\":{\"article\":540}}\n{\"id\":\"art3\",\"text\":\"A minor may seek rescission of a contract that was concluded under fraud.\",\"meta\":{\"article\":96}}\n{\"id\":\"art4\",\"text\":\"A creditor may demand performance of the obligation from the debtor.\",\"meta\":{\"article\":414}}\n{\"id\":\"art5\",\"text\":\"A minor who has been permitted by a legal representative to carry on a business has the same capacity as an adult.\",\"meta\":{\"article\":6}}\n{\"id\":\"art6\",\"text\":\"Rescission does not preclude a claim by the other party for compensation for damage.\",\"meta\":{\"article\":545}}\n";

const CIVIL_SCORES = "{\"doc\": \"art1\", \"thought\": \"kw1\", \"score\": 1}\n{\"doc\": \"art1\", \"thought\": \"kw2\", \"score\": 0}\n{\"doc\": \"art1\", \"thought\": \"g1\", \"score\": 1}\n{\"doc\": \"art1\", \"thought\": \"g2\", \"score\": 1}\n{\"doc\": \"art1\", \"thought\": \"s1\", \"score\": 1}\n{\"doc\": \"art1\", \"thought\": \"q1\", \"score\": 1}\n{\"doc\": \"art2\", \"thought\": \"kw1\", \"score\": 0}\n{\"doc\": \"art2\", \"thought\": \"kw2\", \"score\": 1}\n{\"doc\": \"art2\", \"thought\": \"g1\", \"score\": 1}\n{\"doc\": \"art2\", \"thought\": \"g2\", \"score\": 1}\n{\"doc\": \"art2\", \"thought\": \"s1\", \"score\": 1}\n{\"doc\": \"art2\", \"thought\": \"q1\", \"score\": 1}\n{\"doc\": \"art3\", \"thought\": \"kw1\", \"score\": 1}\n{\"doc\": \"art3\", \"thought\": \"kw2\", \"score\": 1}\n{\"doc\": \"art3\", \"thought\": \"g1\", \"score\": 1}\n{\"doc\": \"art3\", \"thought\": \"g2\", \"score\": 1}\n{\"doc\": \"art3\", \"thought\": \"s1\", \"score\": 0}\n{\"doc\": \"art3\", \"thought\": \"q1\", \"score\": 1}\n{\"doc\": \"art4\", \"thought\": \"kw1\", \"score\": 0}\n{\"doc\": \"art4\", \"thought\": \"kw2\", \"score\": 0}\n{\"doc\": \"art4\", \"thought\": \"g1\", \"score\": 0}\n{\"doc\": \"art4\", \"thought\": \"g2\", \"score\": 0}\n{\"doc\": \"art4\", \"thought\": \"s1\", \"score\": 0}\n{\"doc\": \"art4\", \"thought\": \"q1\", \"score\": 0}\n{\"doc\": \"art5\", \"thought\": \"kw1\", \"score\": 1}\n{\"doc\": \"art5\", \"thought\": \"kw2\", \"score\": 0}\n{\"doc\": \"art5\", \"thought\": \"g1\", \"score\": 1}\n{\"doc\": \"art5\", \"thought\": \"g2\", \"score\": 0}\n{\"doc\": \"art5\", \"thought\": \"s1\", \"score\": 1}\n{\"doc\": \"art5\", \"thought\": \"q1\", \"score\": 1}\n{\"doc\": \"art6\", \"thought\": \"kw1\", \"score\": 0}\n{\"doc\": \"art6\", \"thought\": \"kw2\", \"score\": 1}\n{\"doc\": \"art6\", \"thought\": \"g1\", \"score\": 1}\n{\"doc\": \"art6\", \"thought\": \"g2\", \"score\": 1}\n{\"doc\": \"art6\", \"thought\": \"s1\", \"score\": 1}\n{\"doc\": \"art6\", \"thought\": \"q1\", \"score\": 0}\n";

const $ = (id) => document.getElementById(id);

function fail(target, error) {
  target.innerHTML = "";
  const p = document.createElement("p");
  p.className = "error";
  p.textContent = String(error);
  target.appendChild(p);
}

function table(headers, rows) {
  const t = document.createElement("table");
  const head = t.insertRow();
  for (const h of headers) {
    const th = document.createElement("th");
    th.textContent = h;
    head.appendChild(th);
  }
  for (const row of rows) {
    const tr = t.insertRow();
    for (const cell of row) tr.insertCell().textContent = cell;
  }
  return t;
}

function refreshDocs() {
  const select = $("explain-doc");
  const previous = select.value;
  select.innerHTML = "";
  try {
    for (const id of Object.keys(JSON.parse($("rank-input").value).scores)) {
      select.add(new Option(id, id));
    }
    if (previous) select.value = previous;
  } catch (_) {
    // left empty until the request parses
  }
}

function rank() {
  const out = $("rank-output");
  try {
    const response = JSON.parse(rank_json($("rank-input").value));
    out.innerHTML = "";
    out.appendChild(table(
      ["document", "depth", "in top-k"],
      response.documents.map((d) => [d.id, d.depth, d.included ? "yes" : "no"]),
    ));
    out.appendChild(table(
      ["stage", "considered", "pruned"],
      response.stages.map((s) => [s.slots, s.considered.join(", "), s.pruned.join(", ") || "none"]),
    ));
  } catch (e) {
    fail(out, e);
  }
}

function explain() {
  const out = $("explain-output");
  try {
    const request = JSON.parse($("rank-input").value);
    request.doc = $("explain-doc").value;
    out.textContent = JSON.stringify(JSON.parse(explain_json(JSON.stringify(request))), null, 2);
    out.className = "";
  } catch (e) {
    out.textContent = String(e);
    out.className = "error";
  }
}

function run() {
  const out = $("run-output");
  try {
    const request = {
      config: JSON.parse($("run-config").value),
      corpus: $("run-corpus").value,
      scores: $("run-scores").value,
      explain: true,
    };
    const response = JSON.parse(run_json(JSON.stringify(request)));
    out.innerHTML = "";
    out.appendChild(table(
      ["layer", "metric", "inputs", "survivors"],
      response.layers.map((l) => [l.name, JSON.stringify(l.metric), l.inputs, l.survivors.join(", ")]),
    ));
    out.appendChild(table(
      ["rank", "document", "depth"],
      response.results.map((r) => [r.rank, r.id, r.depth]),
    ));
    const pre = document.createElement("pre");
    pre.textContent = response.results.map((r) => JSON.stringify(r.explanation)).join("\n");
    out.appendChild(pre);
  } catch (e) {
    fail(out, e);
  }
}

await init();
$("rank-input").value = JSON.stringify(WORKED, null, 2);
$("run-config").value = JSON.stringify(CIVIL_CONFIG, null, 2);
$("run-corpus").value = CIVIL_CORPUS;
$("run-scores").value = CIVIL_SCORES;
$("rank-input").addEventListener("input", refreshDocs);
$("rank-button").addEventListener("click", rank);
$("explain-button").addEventListener("click", explain);
$("run-button").addEventListener("click", run);
refreshDocs();
rank();
