#!/usr/bin/env python3
"""Writes the offline fixtures under fixtures/.

  fixtures/tasks/<name>/   snapshot graph, page HTML, scripted responses, task.json
  fixtures/traces/tasks.json   recorded steps of three of the tasks
  fixtures/corpus/*.html       20 shop and booking pages, 10k to 60k chars

Output is deterministic. Rerun after editing, then commit the result.
"""

import json
import random
import re
import shutil
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"

STYLE = """<style>
:root{--brand:#1d4f91;--accent:#e35205;--grey-100:#f5f5f5;--grey-700:#4a4a4a}
body{margin:0;font-family:Helvetica,Arial,sans-serif;color:var(--grey-700)}
.hdr{display:flex;align-items:center;justify-content:space-between;padding:8px 24px;background:var(--brand)}
.nav a{color:#fff;text-decoration:none;padding:12px 16px;display:inline-block}
.tile{border:1px solid #ddd;border-radius:4px;padding:12px;margin:8px;width:220px;display:inline-block;vertical-align:top}
.ftr{background:var(--grey-100);padding:32px 24px;font-size:13px}
.sr-only{position:absolute;width:1px;height:1px;overflow:hidden;clip:rect(0,0,0,0)}
</style>"""


def header(site, brand, links):
    nav = "\n".join(f'      <a id="{i}" href="{h}">{t}</a>' for i, h, t in links)
    return f"""<header class="hdr">
  <a class="logo" href="/" title="{brand} home"><img src="/img/logo.svg" alt="{brand}"></a>
  <nav class="nav" aria-label="Main">
{nav}
  </nav>
</header>"""


def footer(brand):
    cols = ["Customer Service", "About Us", "Careers", "Gift Cards", "Store Locator", "Privacy Policy"]
    items = "\n".join(f'    <li><span class="ftr-item">{c}</span></li>' for c in cols)
    return f"""<footer class="ftr">
  <ul>
{items}
  </ul>
  <p>&copy; 2024 {brand}. All rights reserved.</p>
</footer>"""


def page(title, site, brand, nav, body):
    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{title}</title>
{STYLE}
<script>window.dataLayer=window.dataLayer||[];window.dataLayer.push({{"page":"{title}"}});</script>
</head>
<body>
{header(site, brand, nav)}
<main>
{body}
</main>
{footer(brand)}
</body>
</html>
"""


class Task:
    def __init__(self, name, site, brand, goal, context, nav):
        self.name = name
        self.site = site
        self.brand = brand
        self.goal = goal
        self.context = context
        self.nav = nav
        self.nodes = {}
        self.edges = []
        self.steps = []
        self.start = None

    def url(self, path):
        return f"https://{self.site}{path}"

    def node(self, nid, path, title, body):
        self.nodes[nid] = (self.url(path), title, page(title, self.site, self.brand, self.nav, body))
        if self.start is None:
            self.start = nid

    def edge(self, src, verb, css, dst, secondary=None):
        e = {"from": src, "verb": verb, "locator": {"strategy": "css", "expression": css}, "to": dst}
        if secondary is not None:
            e["secondary"] = secondary
        self.edges.append(e)

    def step(self, node, description, key, verb, target_id, value=None, option=None):
        self.steps.append(
            dict(node=node, description=description, key=key, verb=verb, target=target_id, value=value, option=option)
        )


def cabelas():
    nav = [
        ("nav-camping", "/c/camping", "Camping"),
        ("nav-fishing", "/c/fishing", "Fishing"),
        ("nav-hunting", "/c/hunting", "Hunting"),
        ("nav-boating", "/c/boating", "Boating"),
        ("nav-clothing", "/c/clothing", "Clothing"),
    ]
    t = Task("cabelas", "www.cabelas.test", "Cabela's", "Add a dome tent to my shopping cart",
             "Outdoor gear and sporting goods website offering hunting, fishing, camping and outdoor equipment.", nav)
    t.node("home", "/", "Cabela's | Outdoor Gear", """<section class="hero"><h1>Gear up for the season</h1>
<a id="promo-deals" href="/deals">Shop Weekly Deals</a></section>""")
    t.node("camping", "/c/camping", "Camping | Cabela's", """<h1>Camping</h1><ul class="subcats">
<li><a id="cat-tents" href="/c/tents">Tents</a></li>
<li><a id="cat-sleeping-bags" href="/c/sleeping-bags">Sleeping Bags</a></li>
<li><a id="cat-camp-kitchen" href="/c/camp-kitchen">Camp Kitchen</a></li>
<li><a id="cat-lighting" href="/c/lighting">Lanterns &amp; Lighting</a></li></ul>""")
    t.node("tents", "/c/tents", "Tents | Cabela's", """<h1>Tents</h1><div class="grid">
<div class="tile"><a id="prod-west-wind-dome" href="/p/west-wind-dome-tent" title="cabela's west wind 4-person dome tent">Cabela's West Wind 4-Person Dome Tent</a><span class="price">$229.99</span></div>
<div class="tile"><a id="prod-alaknak" href="/p/alaknak" title="cabela's alaknak 12x12 tent">Cabela's Alaknak 12x12 Tent</a><span class="price">$899.99</span></div>
<div class="tile"><a id="prod-instinct" href="/p/instinct" title="cabela's instinct 2-person backpacking tent">Instinct 2-Person Backpacking Tent</a><span class="price">$149.99</span></div></div>""")
    t.node("product", "/p/west-wind-dome-tent", "West Wind Dome Tent | Cabela's", """<h1>Cabela's West Wind 4-Person Dome Tent</h1>
<p class="price">$229.99</p><label>Quantity</label><input id="qty" name="quantity" type="number" value="1">
<a id="add2cartbtn" class="btn" href="/cart/add" title="add to cart">Add to Cart</a>
<a id="wishlist" href="/wishlist">Save for later</a>""")
    t.node("cart", "/cart", "Shopping Cart | Cabela's", """<h1>Shopping Cart (1)</h1><p>Cabela's West Wind 4-Person Dome Tent was added to your cart.</p>
<a id="checkout" href="/checkout">Checkout</a>""")
    t.edge("home", "click", "#nav-camping", "camping")
    t.edge("camping", "click", "#cat-tents", "tents")
    t.edge("tents", "click", "#prod-west-wind-dome", "product")
    t.edge("product", "click", "#add2cartbtn", "cart")
    t.step("home", 'click the "Camping" category on the navigation bar', "nav-camping", "click", "nav-camping")
    t.step("camping", 'click the "Tents" subcategory', "cat-tents", "click", "cat-tents")
    t.step("tents", 'click the "Cabela\'s West Wind 4-Person Dome Tent" product', "prod-west-wind-dome", "click",
           "prod-west-wind-dome")
    t.step("product", 'click the "Add to Cart" button', "add2cartbtn", "click", "add2cartbtn")
    return t


def macys():
    nav = [
        ("nav-women", "/c/women", "Women"),
        ("nav-men", "/c/men", "Men"),
        ("nav-home-goods", "/c/home", "Home"),
        ("nav-registry", "/registry", "Wedding Registry"),
    ]
    t = Task("macys", "www.macys.test", "Macy's", "Find the wedding registry of Jane Doe",
             "Department store website selling clothing, home goods and offering wedding registries.", nav)
    t.node("home", "/", "Macy's - Shop Fashion Clothing", """<h1>Spring Sale</h1><a id="promo-spring" href="/sale">Shop the sale</a>""")
    t.node("registry", "/registry", "Wedding Registry | Macy's", """<h1>Wedding Registry</h1>
<a id="create-registry" href="/registry/create">Create your registry</a>
<a id="find-registry" href="/registry/find">Find a couple's registry</a>""")
    t.node("find", "/registry/find", "Find a Registry | Macy's", """<h1>Find a couple's registry</h1>
<form action="/registry/results">
<label>First name</label><input id="reg-first-name" name="firstName" type="text">
<label>Last name</label><input id="reg-last-name" name="lastName" type="text">
<button id="reg-search-btn" type="submit">Search</button></form>""")
    t.node("results", "/registry/results", "Registry Results | Macy's", """<h1>1 registry found</h1>
<a id="registry-jane-doe" href="/registry/8812">Jane Doe &amp; John Smith, June 14 2024</a>""")
    t.edge("home", "click", "#nav-registry", "registry")
    t.edge("registry", "click", "#find-registry", "find")
    t.edge("find", "click", "#reg-search-btn", "results")
    t.step("home", 'click the "Wedding Registry" link in the top menu', "nav-registry", "click", "nav-registry")
    t.step("registry", 'click "Find a couple\'s registry"', "find-registry", "click", "find-registry")
    t.step("find", 'type_text "Jane" into the first name field', "reg-first-name", "type_text", "reg-first-name",
           value="Jane")
    t.step("find", 'type_text "Doe" into the last name field', "reg-last-name", "type_text", "reg-last-name",
           value="Doe")
    t.step("find", 'click the "Search" button below the name fields', "reg-search-btn", "click", "reg-search-btn")
    return t


def drugs():
    nav = [
        ("nav-drugs-az", "/drug-information", "Drugs A-Z"),
        ("nav-pill-identifier", "/pill-identifier", "Pill Identifier"),
        ("nav-interactions", "/interactions", "Interaction Checker"),
        ("nav-fda-alerts", "/fda-alerts", "FDA Alerts"),
    ]
    t = Task("drugs", "www.drugs.test", "Drugs.com", "Show me the latest FDA alerts",
             "Drug information website with a drug database, pill identifier and medical news.", nav)
    t.node("home", "/", "Drugs.com | Prescription Drug Information", """<h1>Know more. Be sure.</h1>
<a id="news-latest" href="/news">Latest medical news</a>""")
    t.node("alerts", "/fda-alerts", "FDA Alerts | Drugs.com", """<h1>FDA Alerts</h1><ul>
<li>Recall of contaminated eye drops</li><li>Safety labeling change for sleep aids</li></ul>""")
    t.edge("home", "click", "#nav-fda-alerts", "alerts")
    t.step("home", 'click "FDA Alerts" in the main menu', "nav-fda-alerts", "click", "nav-fda-alerts")
    return t


def newegg():
    nav = [
        ("nav-components", "/c/components", "Components"),
        ("nav-laptops", "/c/laptops", "Laptops"),
        ("nav-monitors", "/c/monitors", "Monitors"),
    ]
    t = Task("newegg", "www.newegg.test", "Newegg",
             "Search for a 27 inch monitor, sort by lowest price and add the cheapest one to the cart",
             "Computer hardware and electronics store with search, deals and product listings.", nav)
    search = """<form class="search"><input id="search-box" name="d" type="search" placeholder="Search Newegg"></form>"""
    t.node("home", "/", "Newegg - Computer Parts and Electronics", search + """<h1>Today's Best Deals</h1>
<a id="deal-ssd" href="/p/ssd">Deal: 2TB NVMe SSD</a>""")
    results = """<h1>Results for "27 inch monitor"</h1>
<label>Sort by</label><select id="sort-select" name="order">
<option value="0">Featured Items</option><option value="1">Lowest Price</option>
<option value="2">Highest Price</option><option value="3">Best Rating</option></select>"""
    t.node("search", "/search", "27 inch monitor | Newegg", search + results + """<div class="grid">
<div class="tile"><a id="prod-lg-27" href="/p/lg-27">LG 27" 4K UHD Monitor</a><span>$329.99</span></div>
<div class="tile"><a id="prod-asus-27" href="/p/asus-27">ASUS 27" 1080p Monitor</a><span>$129.99</span></div></div>""")
    t.node("sorted", "/search/lowest-price", "27 inch monitor, lowest price | Newegg", search + results + """<div class="grid">
<div class="tile"><a id="prod-asus-27" href="/p/asus-27">ASUS 27" 1080p Monitor</a><span>$129.99</span></div>
<div class="tile"><a id="prod-lg-27" href="/p/lg-27">LG 27" 4K UHD Monitor</a><span>$329.99</span></div></div>""")
    t.node("product", "/p/asus-27", "ASUS 27 inch Monitor | Newegg", """<h1>ASUS 27" 1080p Monitor</h1><p>$129.99</p>
<button id="add-to-cart-asus" type="button">Add to cart</button>""")
    t.node("cart", "/cart", "Shopping Cart | Newegg", """<h1>Shopping Cart</h1><p>ASUS 27" 1080p Monitor</p>""")
    t.edge("home", "press_enter", "#search-box", "search")
    t.edge("search", "select_option", "#sort-select", "sorted", {"kind": "options", "value": [2]})
    t.edge("sorted", "click", "#prod-asus-27", "product")
    t.edge("product", "click", "#add-to-cart-asus", "cart")
    t.step("home", 'type_text "27 inch monitor" into the search box', "search-box", "type_text", "search-box",
           value="27 inch monitor")
    t.step("home", "press_enter in the search box", "search-box", "press_enter", "search-box")
    t.step("search", 'select_option "Lowest Price" in the "Sort by" dropdown', "sort-select", "select_option",
           "sort-select", option=2)
    t.step("sorted", 'click the "ASUS 27" 1080p Monitor" listing', "prod-asus-27", "click", "prod-asus-27")
    t.step("product", 'click the "Add to cart" button', "add-to-cart-asus", "click", "add-to-cart-asus")
    return t


def number_nodes(html):
    """Gives every element a backend_node_id, as recorded traces do."""
    counter = iter(range(1, 1_000_000))
    return re.sub(r"<([a-zA-Z][a-zA-Z0-9]*)(?=[\s>/])", lambda m: f'<{m.group(1)} backend_node_id="{next(counter)}"', html)


def node_id_of(html, element_id):
    m = re.search(r'<[a-zA-Z0-9]+ backend_node_id="(\d+)"[^>]*\bid="' + re.escape(element_id) + '"', html)
    assert m, element_id
    return m.group(1)


def script(t):
    """Scripted responses that reproduce the ground truth step by step."""
    shots, rest = [], []
    for s in t.steps:
        url = t.nodes[s["node"]][0]
        shots.append({"component": "screenshot_response", "match_substrings": [f"Current URL: {url}\n"],
                      "response": s["description"], "once": True})
    for s in reversed(t.steps):
        d = s["description"]
        rest.append({"component": "search_key_generation", "match_substrings": [f"NEXT ACTION: {d}"],
                     "response": json.dumps([s["key"]])})
        rest.append({"component": "element_proposal", "match_substrings": [f"NEXT ACTION:\n{d}\n"],
                     "response": "ELEMENTS [1]"})
        rest.append({"component": "element_action_selection", "match_substrings": [f"NEXT ACTION:\n{d}\n"],
                     "response": f"{s['verb']} (1)"})
        if s["value"] is not None:
            rest.append({"component": "secondary_parameter", "match_substrings": [f"NEXT ACTION:\n{d}\n"],
                         "response": s["value"]})
        if s["option"] is not None:
            rest.append({"component": "secondary_parameter", "match_substrings": [f"NEXT ACTION:\n{d}\n"],
                         "response": str(s["option"])})
    last = t.steps[-1]["description"]
    rest.append({"component": "end_state", "match_substrings": [f"- {last}"], "response": "Yes, the goal is complete."})
    rest.append({"component": "end_state", "response": "No, more steps are needed."})
    rest.append({"component": "page_context", "response": t.context})
    rest.append({"component": "double_check", "response": "Yes"})
    rest.append({"component": "cache_key_match", "response": "None"})
    rest.append({"component": "cache_store_check", "response": "Yes"})
    return shots + rest


def write_task(t):
    d = ROOT / "tasks" / t.name
    d.mkdir(parents=True)
    graph = {"start": t.start, "nodes": {}, "edges": t.edges}
    for nid, (url, title, html) in t.nodes.items():
        graph["nodes"][nid] = {"url": url, "title": title}
        (d / f"{nid}.html").write_text(number_nodes(html))
    (d / "graph.json").write_text(json.dumps(graph, indent=2) + "\n")
    (d / "script.json").write_text(json.dumps(script(t), indent=2) + "\n")
    task = {"goal": t.goal, "start_url": t.nodes[t.start][0], "expected_steps": len(t.steps)}
    (d / "task.json").write_text(json.dumps(task, indent=2) + "\n")


def trace(tasks):
    out = []
    for t in tasks:
        actions = []
        for i, s in enumerate(t.steps):
            url, _, html = t.nodes[s["node"]]
            html = number_nodes(html)
            op = {"click": "CLICK", "type_text": "TYPE", "select_option": "SELECT", "press_enter": "ENTER"}[s["verb"]]
            value = s["value"] or ""
            if s["option"] is not None:
                value = ["Featured Items", "Lowest Price", "Highest Price", "Best Rating"][s["option"] - 1]
            actions.append({
                "action_uid": f"{t.name}-{i + 1}",
                "url": url,
                "raw_html": html,
                "operation": {"op": op, "original_op": op, "value": value},
                "pos_candidates": [{"backend_node_id": node_id_of(html, s["target"]), "tag": "", "attributes": ""}],
            })
        out.append({"annotation_id": t.name, "website": t.name, "confirmed_task": t.goal, "actions": actions})
    return out


# corpus ---------------------------------------------------------------

WORDS = ("trail running hiking waterproof insulated jacket boots tent lantern stove backpack camera lens tripod "
         "laptop monitor keyboard mouse headset router speaker blender kettle toaster mattress pillow towel lamp "
         "sofa chair desk rug flight hotel suite deluxe king queen breakfast included refundable nonstop economy "
         "premium business first window aisle checked bag carry-on arrival departure").split()


def cls(rng):
    return "css-" + "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(rng.randint(5, 8)))


def svg(rng):
    pts = " ".join(f"{rng.randint(0, 24)}.{rng.randint(0, 99)} {rng.randint(0, 24)}.{rng.randint(0, 99)}" for _ in range(8))
    return f'<svg viewBox="0 0 24 24" width="16" height="16" aria-hidden="true"><path d="M{pts}Z" fill="currentColor"></path></svg>'


def phrase(rng, n):
    return " ".join(rng.choice(WORDS) for _ in range(n)).capitalize()


def shop_tile(rng, i):
    name = phrase(rng, rng.randint(3, 6))
    sku = rng.randint(100000, 999999)
    c = [cls(rng) for _ in range(6)]
    stars = "".join(svg(rng) for _ in range(5))
    return f"""<div class="{c[0]} product-tile" data-sku="{sku}" data-position="{i}" data-tracking='{{"list":"grid","pos":{i},"sku":"{sku}"}}'>
  <div class="{c[1]}"><div class="{c[2]}"><a class="{c[3]}" href="/p/{sku}" tabindex="-1" aria-hidden="true"><picture><source srcset="/img/{sku}_400.webp 1x, /img/{sku}_800.webp 2x" type="image/webp"><img class="{c[4]}" src="/img/{sku}_400.jpg" alt="{name}" loading="lazy" width="400" height="400"></picture></a></div></div>
  <div class="{c[5]}"><div class="rating" aria-label="{rng.randint(1, 5)} out of 5 stars">{stars}<span class="count">({rng.randint(1, 4000)})</span></div>
  <a class="{cls(rng)} product-title" href="/p/{sku}" title="{name.lower()}">{name}</a>
  <div class="{cls(rng)}"><span class="{cls(rng)}">${rng.randint(5, 900)}.{rng.randint(0, 99):02d}</span><span class="{cls(rng)} was">${rng.randint(900, 1200)}.99</span></div>
  <button class="{cls(rng)} add" type="button" data-sku="{sku}">Add to cart</button></div>
</div>"""


def booking_row(rng, i):
    c = [cls(rng) for _ in range(5)]
    dep, arr = rng.randint(5, 20), rng.randint(6, 23)
    return f"""<li class="{c[0]}" data-result-index="{i}" data-fare-key="{''.join(rng.choice('ABCDEF0123456789') for _ in range(24))}">
  <div class="{c[1]}"><div class="{c[2]}"><span class="{cls(rng)}">{dep:02d}:{rng.randint(0, 59):02d}</span>{svg(rng)}<span class="{cls(rng)}">{arr:02d}:{rng.randint(0, 59):02d}</span></div>
  <div class="{c[3]}"><span>{phrase(rng, 2)}</span><span>{rng.randint(1, 14)}h {rng.randint(0, 59)}m</span></div></div>
  <div class="{c[4]}"><span class="{cls(rng)}">${rng.randint(89, 1400)}</span>
  <button class="{cls(rng)}" type="button" aria-label="Select fare {i}">Select</button>
  <a class="{cls(rng)}" href="/fare/{i}/details" role="button">Details</a></div>
</li>"""


def mega_menu(rng):
    cols = []
    for _ in range(rng.randint(4, 7)):
        links = "".join(f'<li><a href="/c/{rng.randint(100, 999)}" class="{cls(rng)}">{phrase(rng, 2)}</a></li>' for _ in range(rng.randint(4, 9)))
        cols.append(f'<div class="{cls(rng)}"><h4>{phrase(rng, 1)}</h4><ul>{links}</ul></div>')
    return f'<div class="{cls(rng)} mega" style="display:none">{"".join(cols)}</div>'


def blob(rng, size):
    data = {"products": [{"id": rng.randint(1, 10**9), "name": phrase(rng, 4), "price": rng.randint(5, 900)} for _ in range(size)]}
    return f'<script type="application/json" id="__STATE__">{json.dumps(data)}</script>'


def corpus_page(rng, i):
    kind = "shop" if i % 2 == 0 else "booking"
    n = rng.randint(4, 22)
    rows = "\n".join(shop_tile(rng, k) if kind == "shop" else booking_row(rng, k) for k in range(n))
    container = f'<div class="{cls(rng)} grid">{rows}</div>' if kind == "shop" else f'<ul class="{cls(rng)}">{rows}</ul>'
    menus = "".join(f'<div class="{cls(rng)}"><a href="/d/{k}" class="{cls(rng)}">{phrase(rng, 1)}</a>{mega_menu(rng)}</div>' for k in range(rng.randint(3, 6)))
    filters = "".join(
        f'<label class="{cls(rng)}"><input type="checkbox" name="f{k}" value="{rng.randint(1, 99)}"><span>{phrase(rng, 2)}</span></label>'
        for k in range(rng.randint(4, 12)))
    return f"""<!DOCTYPE html>
<html lang="en"><head><meta charset="utf-8"><title>{phrase(rng, 3)} | Fixture {i:02d}</title>
<meta name="viewport" content="width=device-width, initial-scale=1">
{STYLE}
<script>!function(){{var e=document.createElement("script");e.async=!0,e.src="/static/js/vendor.{cls(rng)}.js",document.head.appendChild(e)}}();</script>
{blob(rng, rng.randint(5, 25))}
</head><body class="{cls(rng)}">
<a class="sr-only" href="#main">Skip to content</a>
<header class="{cls(rng)}"><a href="/" class="{cls(rng)}" aria-label="Home">{svg(rng)}</a>
<form role="search" class="{cls(rng)}" action="/search"><input type="search" name="q" placeholder="Search" autocomplete="off" class="{cls(rng)}"><button type="submit" class="{cls(rng)}" aria-label="Search">{svg(rng)}</button></form>
<nav class="{cls(rng)}">{menus}</nav></header>
<main id="main"><aside class="{cls(rng)}"><h3>Filter</h3>{filters}</aside>
{container}
<nav class="{cls(rng)}" aria-label="Pagination"><a href="?page=2" class="{cls(rng)}">Next</a></nav></main>
{footer("Fixture")}
</body></html>
"""


def corpus():
    d = ROOT / "corpus"
    d.mkdir(parents=True)
    rng = random.Random(20240101)
    for i in range(1, 21):
        html = corpus_page(rng, i)
        assert 10_000 <= len(html) <= 60_000, (i, len(html))
        (d / f"page_{i:02d}.html").write_text(html)


def main():
    if ROOT.exists():
        shutil.rmtree(ROOT)
    tasks = [cabelas(), macys(), drugs(), newegg()]
    for t in tasks:
        write_task(t)
    (ROOT / "traces").mkdir(parents=True)
    (ROOT / "traces" / "tasks.json").write_text(json.dumps(trace(tasks[1:]), indent=2) + "\n")
    corpus()


if __name__ == "__main__":
    main()
