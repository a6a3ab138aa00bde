"""Regenerates data/sample_products.csv, the bundled 500-row sample corpus.

The rows are synthetic but shaped like an Open Food Facts extract: each
category draws its nutrient panel from a log-normal around a typical
composition, and its ingredient list from a category-specific pool. A few rows
carry the defects the ingest stage is meant to catch or repair (decimal
commas, missing labels, missing nutrients). Row 0000001 is the Crispy Golden
Onion Rings product, copied from its real package label.

    python3 tools/make_sample.py > data/sample_products.csv
"""

import csv
import random
import sys

rng = random.Random(20240611)

NUTRIENTS = ["protein", "fat", "carbohydrate", "sugars", "fiber", "calcium", "iron",
             "sodium", "cholesterol", "saturated_fat", "trans_fat"]

ONION_RINGS = ("Diced onions, enriched wheat flour (wheat flour, niacin, ferrous sulfate, thiamine mononitrate, "
               "riboflavin, folic acid), vegetable oil (soybean and / or canola), corn starch, wheat flour, water, "
               "modified corn starch, contains 2% or less of calcium chloride, caramel color, cellulose gum, "
               "leavening (sodium aluminum phosphate, sodium bicarbonate), oleoresin paprika (color), salt, "
               "sodium alginate, spice, sugar, whey, yeast, yellow corn flour.")

ADDITIVES = ["soy lecithin", "xanthan gum", "guar gum", "citric acid", "sodium benzoate", "potassium sorbate",
             "caramel color", "red 40", "yellow 5", "carrageenan", "mono- and diglycerides", "aspartame",
             "sucralose", "acesulfame potassium", "monosodium glutamate", "cellulose gum", "sodium nitrite",
             "bht", "tbhq", "polysorbate 80", "sodium alginate", "annatto", "phosphoric acid", "pectin"]
UPF_BASES = ["high fructose corn syrup", "maltodextrin", "dextrose", "hydrogenated soybean oil",
             "modified corn starch", "natural flavor", "artificial flavor", "whey protein isolate",
             "invert sugar", "soy protein isolate", "palm oil", "glucose syrup"]

# name, nova, n rows, fruit/veg share, typical panel (g/100 g), ingredient pool, is_raw
CATEGORIES = [
    ("fresh vegetables", 1, 36, 1.0,
     [1.5, 0.3, 6, 3, 2.5, 0.03, 0.0008, 0.02, 0, 0.05, 0], ["carrots", "broccoli", "spinach", "onions", "kale", "peppers"], True),
    ("fresh fruit", 1, 30, 1.0,
     [0.7, 0.3, 14, 10, 2.2, 0.01, 0.0003, 0.002, 0, 0.05, 0], ["apples", "pears", "bananas", "strawberries", "mangoes"], True),
    ("dried legumes", 1, 24, 1.0,
     [22, 1.5, 60, 3, 15, 0.1, 0.006, 0.01, 0, 0.2, 0], ["lentils", "chickpeas", "black beans", "split peas"], False),
    ("mineral waters", 1, 22, 0.0,
     [0, 0, 0, 0, 0, 0.008, 0, 0.001, 0, 0, 0], ["natural mineral water"], False),
    ("plain nuts", 1, 22, 0.0,
     [20, 50, 20, 4, 9, 0.1, 0.004, 0.005, 0, 6, 0], ["almonds", "walnuts", "cashews", "hazelnuts"], True),
    ("vegetable oils", 2, 22, 0.0,
     [0, 100, 0, 0, 0, 0, 0, 0, 0, 14, 0], ["olive oil", "sunflower oil", "canola oil"], False),
    ("sugars and honey", 2, 20, 0.0,
     [0.3, 0, 82, 80, 0.2, 0.006, 0.0004, 0.004, 0, 0, 0], ["honey", "cane sugar", "maple syrup"], False),
    ("salted butter", 2, 20, 0.0,
     [0.9, 81, 0.1, 0.1, 0, 0.024, 0, 0.6, 0.21, 51, 3], ["cream", "salt"], False),
    ("cheeses", 3, 28, 0.0,
     [24, 30, 2, 0.5, 0, 0.7, 0.0003, 0.65, 0.09, 19, 1], ["pasteurized milk", "salt", "cheese cultures", "enzymes"], False),
    ("canned vegetables", 3, 26, 0.9,
     [2, 0.4, 8, 3, 3, 0.03, 0.001, 0.3, 0, 0.06, 0], ["green beans", "corn", "tomatoes", "water", "salt", "peas"], False),
    ("artisan breads", 3, 26, 0.0,
     [9, 3, 50, 4, 4, 0.05, 0.003, 0.5, 0, 0.6, 0], ["wheat flour", "water", "salt", "yeast", "rye flour"], False),
    ("cured meats", 3, 22, 0.0,
     [22, 20, 1, 0.5, 0, 0.01, 0.002, 1.4, 0.08, 7, 0.1], ["pork", "salt", "black pepper", "garlic"], False),
    ("soft drinks", 4, 40, 0.0,
     [0, 0, 11, 10.5, 0, 0.004, 0, 0.015, 0, 0, 0], ["carbonated water"], False),
    ("breakfast cereals", 4, 34, 0.0,
     [7, 3, 82, 30, 4, 0.1, 0.012, 0.45, 0, 1, 0], ["whole grain corn", "sugar", "rice flour"], False),
    ("cookies", 4, 40, 0.0,
     [5, 22, 66, 34, 2, 0.03, 0.002, 0.35, 0.02, 10, 0.3], ["enriched wheat flour", "sugar", "cocoa"], False),
    ("frozen snacks", 4, 30, 0.1,
     [7, 14, 30, 3, 2.5, 0.06, 0.002, 0.55, 0.02, 4, 0.2], ["potatoes", "enriched wheat flour", "cheese"], False),
    ("instant noodles", 4, 26, 0.0,
     [9, 17, 62, 3, 2.5, 0.02, 0.004, 1.9, 0, 8, 0.1], ["enriched wheat flour", "salt", "dehydrated vegetables"], False),
    ("flavored yogurts", 4, 31, 0.05,
     [3.5, 2.5, 15, 13, 0.2, 0.12, 0.0001, 0.05, 0.008, 1.6, 0], ["cultured milk", "sugar", "strawberries"], False),
]
assert sum(c[2] for c in CATEGORIES) == 499


def noisy(value, spread):
    if value == 0:
        return 0.0
    return value * rng.lognormvariate(0, spread)


def panel(base, spread):
    v = [noisy(b, spread) for b in base]
    v[1] = min(v[1], 100.0)
    v[2] = min(v[2], 100.0 - v[0] - v[1] if v[0] + v[1] < 100 else 0.0)
    v[3] = min(v[3], v[2])
    v[9] = min(v[9], 0.8 * v[1])
    v[10] = min(v[10], max(0.0, v[1] - v[9]) * 0.5)
    return v


def fmt(x, digits):
    s = f"{x:.{digits}f}".rstrip("0").rstrip(".")
    return s or "0"


def ingredients(nova, pool):
    items = rng.sample(pool, k=min(len(pool), rng.randint(1, len(pool)))) if nova != 1 else [rng.choice(pool)]
    if nova == 2 and rng.random() < 0.3:
        items = items[:1]
    if nova == 3 and rng.random() < 0.5:
        items.append(rng.choice(["vinegar", "sugar", "sea salt", "citric acid"]))
    if nova == 4:
        items += rng.sample(UPF_BASES, k=rng.randint(1, 4))
        adds = rng.sample(ADDITIVES, k=rng.randint(1, 5))
        if rng.random() < 0.5 and len(adds) >= 2:
            items.append(f"contains 2% or less of {adds[0]}")
            items.append(f"stabilizers ({', '.join(adds[1:])})")
        else:
            items += adds
    return ", ".join(items)


def energy_kj(v):
    protein, fat, carb, fiber = v[0], v[1], v[2], v[4]
    return 17 * protein + 37 * fat + 17 * max(carb - fiber, 0) + 8 * fiber


header = ["id", "product_name", "ingredients_text", "nova_group"] + [f"{n}_g" for n in NUTRIENTS] + [
    "category", "kind", "energy_kj", "fruit_veg_fraction", "is_water", "is_raw", "has_mup", "has_risk_mup"]
w = csv.writer(sys.stdout, lineterminator="\n")
w.writerow(header)

onion = [2.27, 11.36, 28.41, 3.41, 4.5, 0.045, 0.001, 0.273, 0, 1.7, 0]
w.writerow(["0000001", "Crispy Golden Onion Rings - Roundy's - 88 g", ONION_RINGS, 4]
           + [fmt(x, 3) for x in onion]
           + ["frozen snacks", "", fmt(energy_kj(onion), 1), "0.3", "0", "0", "1", "0"])

rows = []
for name, nova, n, fv, base, pool, raw in CATEGORIES:
    for i in range(n):
        spread = 0.35
        v = panel(base, spread)
        label = nova
        # Label noise: some products sit on the border between classes.
        if rng.random() < 0.06:
            label = rng.choice([c for c in (1, 2, 3, 4) if c != nova])
        ingr = ingredients(nova, pool)
        title = f"{name.title()} {i + 1:02d}"
        mup = "1" if nova == 4 else "0"
        risk = "1" if nova == 4 and rng.random() < 0.3 else "0"
        water = "1" if name == "mineral waters" else "0"
        rows.append([title, ingr, label, v, name, fv, water, "1" if raw else "0", mup, risk])

rng.shuffle(rows)
for k, (title, ingr, label, v, name, fv, water, raw, mup, risk) in enumerate(rows):
    cells = [fmt(x, 4) for x in v]
    label_cell = str(label)
    if k % 61 == 7:
        label_cell = ""  # unlabeled row, kept by ingest, dropped by --complete
    if k % 47 == 11:
        cells[NUTRIENTS.index("fiber")] = ""  # missing nutrient
    if k % 53 == 5 and "." in cells[1]:
        cells[1] = cells[1].replace(".", ",")  # decimal comma, repaired by ingest
    w.writerow([f"{k + 2:07d}", title, ingr, label_cell] + cells
               + [name, "", fmt(energy_kj(v), 1), fmt(fv, 2), water, raw, mup, risk])
