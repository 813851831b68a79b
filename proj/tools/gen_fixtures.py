#!/usr/bin/env python3
"""Generate the bundled environment fixtures.

Writes env JSON files, gray icon templates (PNG + sidecar JSON) and
oracle_counts.json, whose reachable-state / element counts come from a BFS
implemented here, independently of the C++ oracle.

    python3 tools/gen_fixtures.py [--out fixtures]
"""

import argparse
import json
import random
from collections import deque
from pathlib import Path

from PIL import Image

SCREEN_W, SCREEN_H = 320, 240
ICON = 12
GLYPH_ADVANCE = 6


def text_box(x, y, text):
    return {"x": x, "y": y, "w": GLYPH_ADVANCE * len(text) + 1, "h": 9}


def make_icon(rng):
    """A 12x12 gray glyph: a random shape over a textured ground."""
    px = [[rng.randint(60, 200) for _ in range(ICON)] for _ in range(ICON)]
    shape = rng.choice(["disc", "bar", "cross", "frame", "diag"])
    ink = rng.choice([10, 25, 235, 250])
    for y in range(ICON):
        for x in range(ICON):
            dx, dy = x - 5.5, y - 5.5
            on = {
                "disc": dx * dx + dy * dy < 14,
                "bar": 4 <= y <= 7,
                "cross": abs(dx) < 1.5 or abs(dy) < 1.5,
                "frame": x in (1, 10) or y in (1, 10),
                "diag": abs(x - y) <= 1,
            }[shape]
            if on:
                px[y][x] = ink
    return px


class EnvBuilder:
    def __init__(self, env_id, category, root: Path, seed):
        self.env_id = env_id
        self.category = category
        self.root = root
        self.rng = random.Random(seed)
        self.templates = {}
        self.states = {}
        self.initial = None

    def template(self, tid, name, meta=None):
        if tid in self.templates:
            return tid
        tdir = self.root / "templates"
        tdir.mkdir(parents=True, exist_ok=True)
        px = make_icon(self.rng)
        img = Image.new("L", (ICON, ICON))
        img.putdata([v for row in px for v in row])
        img.save(tdir / f"{tid}.png", optimize=False)
        side = {"template_id": tid, "name": name}
        if meta:
            side["meta"] = meta
        (tdir / f"{tid}.json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
        entry = {"template_id": tid, "name": name, "path": f"templates/{tid}.png"}
        if meta:
            entry["meta"] = meta
        self.templates[tid] = entry
        return tid

    def state(self, sid, background, is_error=False):
        st = {"background": list(background), "elements": []}
        if is_error:
            st["is_error"] = True
        self.states[sid] = st
        if self.initial is None:
            self.initial = sid
        return st

    @staticmethod
    def icon(st, tid, name, x, y, transitions=None, meta=None):
        e = {"name": name, "kind": "icon", "bbox": {"x": x, "y": y, "w": ICON, "h": ICON},
             "render": {"template_id": tid}}
        if transitions:
            e["transitions"] = transitions
        if meta:
            e["meta"] = meta
        st["elements"].append(e)
        return e

    @staticmethod
    def text(st, name, x, y, transitions=None, meta=None):
        e = {"name": name, "kind": "text", "bbox": text_box(x, y, name), "render": {"text": name}}
        if transitions:
            e["transitions"] = transitions
        if meta:
            e["meta"] = meta
        st["elements"].append(e)
        return e

    def doc(self):
        return {
            "env_id": self.env_id,
            "category": self.category,
            "screen": {"w": SCREEN_W, "h": SCREEN_H},
            "initial_state": self.initial,
            "templates": [self.templates[k] for k in sorted(self.templates)],
            "states": self.states,
        }

    def write(self, path: Path):
        path.write_text(json.dumps(self.doc(), indent=1, sort_keys=True) + "\n")


# ------------------------------------------------------------------ oracle


def bfs(doc):
    """Reachable states, element names and feasible click triples."""
    states = doc["states"]
    seen = {doc["initial_state"]}
    queue = deque([doc["initial_state"]])
    names, errors, feasible = set(), set(), set()
    while queue:
        sid = queue.popleft()
        st = states[sid]
        if st.get("is_error"):
            errors.add(sid)
        for e in st["elements"]:
            names.add(e["name"])
            feasible.add((sid, e["name"], "click"))
            for kind, target in e.get("transitions", {}).items():
                feasible.add((sid, e["name"], kind))
                if target not in seen:
                    seen.add(target)
                    queue.append(target)
    return {
        "reachable_states": len(seen),
        "element_names": len(names),
        "error_states": len(errors),
        "feasible_actions": len(feasible),
        "globally_unique_names": globally_unique(doc),
    }


def globally_unique(doc):
    counts = {}
    for st in doc["states"].values():
        for e in st["elements"]:
            counts[e["name"]] = counts.get(e["name"], 0) + 1
    return all(c == 1 for c in counts.values())


# ------------------------------------------------------------------ suite

WORDS_A = ["Quick", "Smart", "Auto", "Batch", "Custom", "Global", "Local", "Shared", "Recent", "Hidden",
           "Linked", "Soft", "Deep", "Live", "Static", "Fine", "Bulk", "Inline", "Nested", "Grouped"]
WORDS_B = ["Layout", "Filter", "Format", "Style", "Margin", "Border", "Shadow", "Column", "Index", "Label",
           "Preset", "Anchor", "Spacing", "Outline", "Palette", "Layer", "Guide", "Marker", "Profile", "Theme"]

SUITES = {
    "ribbon_writer": {
        "category": "productive",
        "panels": ["Home", "Insert", "Design", "Review", "View", "Mailings"],
        "errors": ["Error: document is locked", "Warning: unsaved changes", "Error: printer offline"],
        "seed": 11,
        "bg": (236, 236, 240),
    },
    "canvas_studio": {
        "category": "creative",
        "panels": ["Brush", "Layers", "Adjust", "Select", "Export", "Effects"],
        "errors": ["Error: layer is locked", "Warning: low memory", "Error: codec missing"],
        "seed": 23,
        "bg": (58, 60, 66),
    },
    "shop_flow": {
        "category": "commercial",
        "panels": ["Catalog", "Cart", "Orders", "Account", "Deals", "Support"],
        "errors": ["Error: payment declined", "Warning: session expiring", "Error: item out of stock"],
        "seed": 37,
        "bg": (245, 243, 236),
    },
}


def shade(bg, k):
    return tuple(max(0, min(255, c + k)) for c in bg)


def build_suite_env(env_id, suite, out_dir: Path):
    b = EnvBuilder(env_id, suite["category"], out_dir, suite["seed"])
    rng = random.Random(suite["seed"] * 7 + 1)
    pool = [f"{a} {w}" for a in WORDS_A for w in WORDS_B]
    rng.shuffle(pool)
    pool_iter = iter(pool)
    bg = suite["bg"]

    toolbar = []
    for i, panel in enumerate(suite["panels"]):
        name = f"{panel} tab icon"
        tid = b.template(f"tab_{i}", name, {
            "shape_desc": f"A small square glyph number {i + 1} in the top toolbar",
            "function_desc": f"Opens the {panel} panel",
        })
        toolbar.append((tid, name, f"panel_{i}"))
    home_tid = b.template("home", "Home button icon", {
        "shape_desc": "A house outline at the right end of the toolbar",
        "function_desc": "Returns to the start screen",
    })

    def chrome(st, title):
        for i, (tid, name, target) in enumerate(toolbar):
            b.icon(st, tid, name, 6 + 18 * i, 6, {"click": target})
        b.icon(st, home_tid, "Home button icon", SCREEN_W - 20, 6, {"click": "start"})
        b.text(st, title, 8, 26)

    start = b.state("start", bg)
    chrome(start, f"{env_id.replace('_', ' ').title()} start")
    b.text(start, "Open recent", 8, 50, meta={"function_desc": "Lists recently opened items"})
    b.text(start, "About", 8, 66)
    for i in range(0, len(toolbar), 2):
        b.text(start, f"Go to {suite['panels'][i]}", 160, 50 + 16 * (i // 2), {"click": toolbar[i][2]},
               meta={"function_desc": f"Opens the {suite['panels'][i]} panel"})

    error_iter = iter(suite["errors"])
    err_count = 0

    def add_error(parent_state, label, x, y):
        nonlocal err_count
        msg = next(error_iter, None)
        if msg is None:
            return
        sid = f"error_{err_count}"
        err_count += 1
        es = b.state(sid, (120, 30, 30), is_error=True)
        b.text(es, msg, 40, 100)
        b.text(es, f"Dismiss {err_count}", 40, 120)
        b.text(parent_state, label, x, y, {"click": sid},
               meta={"function_desc": f"Runs {label.lower()}"})

    leaf_icon = 0
    for p, (tid, tab_name, sid) in enumerate(toolbar):
        panel = suite["panels"][p]
        ps = b.state(sid, shade(bg, -6 - 2 * p))
        chrome(ps, f"{panel} panel")
        groups = 3 if p % 2 == 0 else 4
        for g in range(groups):
            gname = next(pool_iter)
            gid = f"{sid}_g{g}"
            gs = b.state(gid, shade(bg, -10 - 2 * p - g))
            chrome(gs, f"{panel} / {gname}")
            y0 = 50 + 16 * g
            if g % 2 == 0:
                b.text(ps, f"{gname} options", 8, y0, {"click": gid},
                       meta={"function_desc": f"Shows the {gname.lower()} options of the {panel} panel"})
            else:
                icon_name = f"{gname} icon"
                itid = b.template(f"grp_{p}_{g}", icon_name, {
                    "shape_desc": f"A gray {['disc', 'bar', 'cross', 'frame'][g % 4]}-like symbol",
                    "function_desc": f"Opens {gname.lower()} settings",
                })
                b.icon(ps, itid, icon_name, 8 + 130 * (g % 2), y0)
                ps["elements"][-1]["transitions"] = {"click": gid}
            b.text(gs, "Back", 8, 200, {"click": sid})
            leaves = 2
            for l in range(leaves):
                lname = next(pool_iter)
                lid = f"{gid}_l{l}"
                ls = b.state(lid, shade(bg, -14 - 2 * p - g - l))
                chrome(ls, f"{gname} > {lname}")
                b.text(gs, f"Edit {lname}", 8, 50 + 16 * l, {"click": lid},
                       meta={"function_desc": f"Edits the {lname.lower()} setting"})
                b.text(ls, "Back", 8, 200, {"click": gid})
                for k in range(2):
                    b.text(ls, f"{lname} value {k + 1}", 8, 50 + 16 * k)
                if (p + g + l) % 3 == 0:
                    icon_name = f"{lname} apply icon"
                    itid = b.template(f"leaf_{leaf_icon}", icon_name, {
                        "shape_desc": "A small square badge next to the value list",
                        "function_desc": f"Applies the {lname.lower()} setting",
                    })
                    leaf_icon += 1
                    b.icon(ls, itid, icon_name, 200, 50)
                    lids = f"{lid}_done"
                    ds = b.state(lids, shade(bg, -20))
                    chrome(ds, f"{lname} applied")
                    b.text(ds, "Back", 8, 200, {"click": lid})
                    ls["elements"][-1]["transitions"] = {"click": lids}
            if g == 1 and p % 2 == 0:
                add_error(gs, f"Run {gname} check", 160, 50)
    b.write(out_dir / f"{env_id}.json")
    return b


# ------------------------------------------------------------------ office_mini


def build_office_mini(out_dir: Path):
    b = EnvBuilder("office_mini", "productive", out_dir, 5)
    bold = b.template("bold", "Bold icon", {"shape_desc": "A heavy letter B", "function_desc": "Makes text bold"})
    save = b.template("save", "Save icon", {"shape_desc": "A floppy disk", "function_desc": "Saves the document"})
    ruler = b.template("ruler", "Ruler handle icon",
                       {"shape_desc": "A small triangle on the ruler", "function_desc": "Sets the indent"})
    page = b.template("page", "Page scroller icon",
                      {"shape_desc": "A tall bar on the right", "function_desc": "Scrolls the page"})
    bg = (238, 238, 242)
    names = ["doc", "font", "font_size", "font_color", "save_as", "save_done", "indent", "page2", "insert",
             "table", "save_error", "about"]
    st = {n: b.state(n, shade(bg, -3 * i), is_error=(n == "save_error")) for i, n in enumerate(names)}

    def toolbar(s):
        b.icon(s, bold, "Bold icon", 6, 6, {"click": "font"})
        b.icon(s, save, "Save icon", 24, 6, {"click": "save_as"})
        b.text(s, "Insert", 44, 8, {"click": "insert"})

    for n in names:
        if n != "save_error":
            toolbar(st[n])
    b.icon(st["doc"], ruler, "Ruler handle icon", 60, 30, {"drag": "indent"})
    b.icon(st["doc"], page, "Page scroller icon", 300, 60, {"scroll": "page2"})
    b.text(st["doc"], "About", 8, 220, {"click": "about"})
    b.text(st["font"], "Size", 8, 40, {"click": "font_size"})
    b.text(st["font"], "Color", 8, 56, {"click": "font_color"})
    b.text(st["font_size"], "12 pt", 8, 40, meta={"function_desc": "Sets the font size to 12 points"})
    b.text(st["font_color"], "Red", 8, 40)
    b.text(st["font_color"], "Blue", 60, 40)
    b.text(st["save_as"], "Save here", 8, 40, {"click": "save_done"})
    b.text(st["save_as"], "Save to locked folder", 8, 56, {"click": "save_error"})
    b.text(st["save_done"], "Saved", 8, 40)
    b.text(st["indent"], "Indent set", 8, 40)
    b.text(st["page2"], "Page 2", 8, 40)
    b.text(st["insert"], "Table", 8, 40, {"click": "table"})
    b.text(st["table"], "3 x 3 grid", 8, 40)
    b.text(st["save_error"], "Error: folder is read-only", 40, 100)
    b.text(st["save_error"], "OK", 40, 120)
    b.text(st["about"], "Version 1.0", 8, 40)
    b.write(out_dir / "office_mini.json")
    return b


# ------------------------------------------------------------------ micro


def build_chain3(out_dir: Path):
    b = EnvBuilder("chain3", "micro", out_dir, 101)
    a = b.template("next_a", "Next A icon")
    c = b.template("next_b", "Next B icon")
    s0 = b.state("s0", (240, 240, 240))
    s1 = b.state("s1", (230, 230, 235))
    b.state("s2", (220, 225, 230))
    b.icon(s0, a, "Next A icon", 20, 20, {"click": "s1"})
    b.icon(s1, c, "Next B icon", 40, 20, {"click": "s2"})
    b.write(out_dir / "chain3.json")
    return b


def build_critic_micro(out_dir: Path):
    b = EnvBuilder("critic_micro", "micro", out_dir, 202)
    gear = b.template("gear", "Settings icon")
    s0 = b.state("start", (240, 240, 240))
    s1 = b.state("settings", (228, 232, 236))
    err = b.state("denied", (120, 30, 30), is_error=True)
    b.icon(s0, gear, "Settings icon", 10, 10, {"click": "settings"})
    b.text(s0, "Refresh", 10, 40, {"click": "start"})
    b.text(s1, "Delete all", 10, 40, {"click": "denied"})
    b.text(err, "Error: access denied", 40, 100)
    b.text(err, "OK", 40, 120)
    b.write(out_dir / "critic_micro.json")
    return b


def build_unique_tree(out_dir: Path):
    """Every element name occurs exactly once; includes an unreachable state."""
    b = EnvBuilder("unique_tree", "micro", out_dir, 303)
    rng = random.Random(303)
    s = b.state("root", (240, 240, 240))
    frontier = ["root"]
    n_states = 1
    counter = 0
    while frontier and n_states < 24:
        sid = frontier.pop(0)
        st = b.states[sid]
        for k in range(rng.randint(2, 3)):
            if n_states >= 24:
                break
            child = f"n{n_states}"
            n_states += 1
            cs = b.state(child, shade((236, 236, 240), -n_states))
            counter += 1
            if counter % 3 == 0:
                tid = b.template(f"u{counter}", f"Node {counter} icon",
                                 {"shape_desc": f"Glyph {counter}", "function_desc": f"Opens node {counter}"})
                b.icon(st, tid, f"Node {counter} icon", 10 + 60 * k, 40, {"click": child})
            else:
                b.text(st, f"Open node {counter}", 10, 40 + 16 * k, {"click": child})
            b.text(cs, f"Label of {child}", 10, 200)
            frontier.append(child)
    # A back link keeps the graph from being a pure tree.
    b.text(b.states["n5"], "Up from n5", 200, 200, {"click": "root"})
    err = b.state("fault", (120, 30, 30), is_error=True)
    b.text(err, "Warning: node corrupted", 40, 100)
    b.text(b.states["n7"], "Corrupt node", 200, 180, {"click": "fault"})
    orphan = b.state("orphan", (200, 200, 200))
    b.text(orphan, "Never shown", 10, 10)
    b.write(out_dir / "unique_tree.json")
    return b


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    counts = {}
    suite = out / "suite"
    suite.mkdir(parents=True, exist_ok=True)
    for env_id, cfg in SUITES.items():
        d = suite / env_id
        d.mkdir(parents=True, exist_ok=True)
        b = build_suite_env(env_id, cfg, d)
        counts[f"suite/{env_id}/{env_id}.json"] = bfs(b.doc())
    for name, fn in (("office_mini", build_office_mini), ("chain3", build_chain3),
                     ("critic_micro", build_critic_micro), ("unique_tree", build_unique_tree)):
        d = out / "envs" / name
        d.mkdir(parents=True, exist_ok=True)
        b = fn(d)
        counts[f"envs/{name}/{name}.json"] = bfs(b.doc())
    (out / "oracle_counts.json").write_text(json.dumps(counts, indent=2, sort_keys=True) + "\n")
    for k, v in sorted(counts.items()):
        print(k, v)


if __name__ == "__main__":
    main()
