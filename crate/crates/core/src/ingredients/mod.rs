//! Ingredient-list parsing and engineered count features.
//!
//! Lists are split on `,` and `;` at bracket depth zero; bracketed content
//! becomes the children of the preceding item and is split by the same rule.
//! Unmatched brackets are kept as literal text and flagged on the tree.

mod lexicon;

use std::collections::BTreeSet;

use serde::Serialize;

pub use lexicon::{AdditiveEntry, AdditiveLexicon, LexiconError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngredientItem {
    pub text: String,
    pub children: Vec<IngredientItem>,
}

impl IngredientItem {
    pub fn leaf(text: impl Into<String>) -> Self {
        IngredientItem { text: text.into(), children: Vec::new() }
    }

    fn visit<'a>(&'a self, out: &mut Vec<&'a IngredientItem>) {
        out.push(self);
        for c in &self.children {
            c.visit(out);
        }
    }

    fn render(&self, out: &mut String) {
        out.push_str(&self.text);
        if !self.children.is_empty() {
            out.push_str(" (");
            render_items(&self.children, out);
            out.push(')');
        }
    }
}

fn render_items(items: &[IngredientItem], out: &mut String) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        item.render(out);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngredientTree {
    pub items: Vec<IngredientItem>,
    /// Set when an unmatched bracket was kept as literal text.
    pub unbalanced: bool,
}

impl IngredientTree {
    /// Every item at every depth, in pre-order.
    pub fn all_items(&self) -> Vec<&IngredientItem> {
        let mut out = Vec::new();
        for item in &self.items {
            item.visit(&mut out);
        }
        out
    }

    pub fn depth(&self) -> usize {
        fn depth(items: &[IngredientItem]) -> usize {
            items.iter().map(|i| 1 + depth(&i.children)).max().unwrap_or(0)
        }
        depth(&self.items)
    }

    /// Canonical text form: `name (child, child), name`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        render_items(&self.items, &mut out);
        out
    }
}

/// Lowercases and collapses internal whitespace.
pub fn normalize_name(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn closing_for(open: char) -> char {
    if open == '(' {
        ')'
    } else {
        ']'
    }
}

/// Positions (char indices) of brackets that pair up properly.
fn structural_brackets(chars: &[char]) -> (Vec<bool>, bool) {
    let mut structural = vec![false; chars.len()];
    let mut stack: Vec<usize> = Vec::new();
    let mut unbalanced = false;
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '(' | '[' => stack.push(i),
            ')' | ']' => match stack.last() {
                Some(&open) if closing_for(chars[open]) == c => {
                    stack.pop();
                    structural[open] = true;
                    structural[i] = true;
                }
                _ => unbalanced = true,
            },
            _ => {}
        }
    }
    if !stack.is_empty() {
        unbalanced = true;
    }
    (structural, unbalanced)
}

fn parse_span(chars: &[char], structural: &[bool], start: usize, end: usize) -> Vec<IngredientItem> {
    let mut items = Vec::new();
    let mut name = String::new();
    let mut children = Vec::new();
    let mut i = start;
    let flush = |name: &mut String, children: &mut Vec<IngredientItem>, items: &mut Vec<IngredientItem>| {
        let text = normalize_name(name);
        let kids = std::mem::take(children);
        if !text.is_empty() {
            items.push(IngredientItem { text, children: kids });
        } else if !kids.is_empty() {
            // A bare bracket group with no name: lift its contents.
            items.extend(kids);
        }
        name.clear();
    };
    while i < end {
        let c = chars[i];
        if structural[i] && (c == '(' || c == '[') {
            let close = matching_close(chars, structural, i);
            children.extend(parse_span(chars, structural, i + 1, close));
            name.push(' ');
            i = close + 1;
            continue;
        }
        if c == ',' || c == ';' {
            flush(&mut name, &mut children, &mut items);
        } else {
            name.push(c);
        }
        i += 1;
    }
    flush(&mut name, &mut children, &mut items);
    items
}

fn matching_close(chars: &[char], structural: &[bool], open: usize) -> usize {
    let mut depth = 0usize;
    for (j, &c) in chars.iter().enumerate().skip(open) {
        if !structural[j] {
            continue;
        }
        match c {
            '(' | '[' => depth += 1,
            _ => {
                depth -= 1;
                if depth == 0 {
                    return j;
                }
            }
        }
    }
    unreachable!("structural brackets are paired")
}

/// Parses an ingredient list. Never fails; see [`IngredientTree::unbalanced`].
pub fn parse_ingredients(text: &str) -> IngredientTree {
    let trimmed = text.trim().trim_end_matches('.');
    let chars: Vec<char> = trimmed.chars().collect();
    let (structural, unbalanced) = structural_brackets(&chars);
    let items = parse_span(&chars, &structural, 0, chars.len());
    IngredientTree { items, unbalanced }
}

/// Number of top-level entries on the label.
pub fn count_ingredients(tree: &IngredientTree) -> usize {
    tree.items.len()
}

/// Distinct item names (any depth) that match the lexicon.
pub fn matched_additives<'a>(tree: &IngredientTree, lexicon: &'a AdditiveLexicon) -> BTreeSet<(String, &'a str)> {
    tree.all_items()
        .into_iter()
        .filter_map(|item| lexicon.lookup(&item.text).map(|code| (item.text.clone(), code)))
        .collect()
}

pub fn count_additives(tree: &IngredientTree, lexicon: &AdditiveLexicon) -> usize {
    matched_additives(tree, lexicon).len()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const ONION_RINGS: &str = "Diced onions, enriched wheat flour (wheat flour, niacin, ferrous sulfate, thiamine mononitrate, riboflavin, folic acid), vegetable oil (soybean and / or canola), corn starch, wheat flour, water, modified corn starch, contains 2% or less of calcium chloride, caramel color, cellulose gum, leavening (sodium aluminum phosphate, sodium bicarbonate), oleoresin paprika (color), salt, sodium alginate, spice, sugar, whey, yeast, yellow corn flour.";

    #[test]
    fn nested_children() {
        let t = parse_ingredients("a, b (c, d), e");
        assert_eq!(t.items.len(), 3);
        assert_eq!(t.items[1].text, "b");
        assert_eq!(t.items[1].children, vec![IngredientItem::leaf("c"), IngredientItem::leaf("d")]);
        assert!(!t.unbalanced);
    }

    #[test]
    fn single_and_deep() {
        assert_eq!(count_ingredients(&parse_ingredients("water")), 1);
        let t = parse_ingredients("x (y (z))");
        assert_eq!(count_ingredients(&t), 1);
        assert_eq!(t.depth(), 3);
        assert_eq!(t.render(), "x (y (z))");
    }

    #[test]
    fn onion_rings_has_nineteen_entries() {
        let t = parse_ingredients(ONION_RINGS);
        assert_eq!(count_ingredients(&t), 19);
        assert_eq!(t.items[0].text, "diced onions");
        assert_eq!(t.items[1].children.len(), 6);
        assert_eq!(t.items[2].children[0].text, "soybean and / or canola");
        assert_eq!(t.items[7].text, "contains 2% or less of calcium chloride");
        assert_eq!(t.items[11].text, "oleoresin paprika");
        assert_eq!(t.items[11].children, vec![IngredientItem::leaf("color")]);
        assert_eq!(t.items[18].text, "yellow corn flour");
    }

    #[test]
    fn onion_rings_has_four_additives() {
        let t = parse_ingredients(ONION_RINGS);
        let lex = AdditiveLexicon::builtin();
        let matched: Vec<(String, &str)> = matched_additives(&t, &lex).into_iter().collect();
        assert_eq!(
            matched,
            vec![
                ("caramel color".to_string(), "E150a"),
                ("cellulose gum".to_string(), "E466"),
                ("oleoresin paprika".to_string(), "E160c"),
                ("sodium alginate".to_string(), "E401"),
            ]
        );
        assert_eq!(count_additives(&t, &lex), 4);
    }

    #[test]
    fn semicolons_and_square_brackets() {
        let t = parse_ingredients("milk; cocoa [cocoa mass; cocoa butter]; SUGAR");
        assert_eq!(t.items.len(), 3);
        assert_eq!(t.items[1].children.len(), 2);
        assert_eq!(t.items[2].text, "sugar");
    }

    #[test]
    fn unbalanced_brackets_become_literal() {
        let t = parse_ingredients("a (b, c");
        assert!(t.unbalanced);
        assert_eq!(t.items.len(), 2);
        assert_eq!(t.items[0].text, "a (b");

        let t = parse_ingredients("a), b");
        assert!(t.unbalanced);
        assert_eq!(t.items[0].text, "a)");

        let t = parse_ingredients("a (b], c");
        assert!(t.unbalanced);
    }

    #[test]
    fn empty_segments_are_dropped() {
        let t = parse_ingredients("a,, b, ,");
        assert_eq!(t.items.len(), 2);
        assert!(t.all_items().iter().all(|i| !i.text.is_empty()));
    }

    #[test]
    fn additive_matching() {
        let lex = AdditiveLexicon::from_entries(vec![AdditiveEntry {
            code: "E466".into(),
            names: vec!["cellulose gum".into()],
        }])
        .unwrap();
        let t = parse_ingredients("sugar, cellulose gum, salt");
        assert_eq!(count_additives(&t, &lex), 1);
        assert_eq!(count_additives(&t, &AdditiveLexicon::default()), 0);
        // Repeated occurrences of one name count once.
        let t = parse_ingredients("cellulose gum, filling (cellulose gum)");
        assert_eq!(count_additives(&t, &lex), 1);
    }

    fn item_name() -> impl Strategy<Value = String> {
        "[a-z][a-z ]{0,8}[a-z]"
    }

    proptest! {
        #[test]
        fn top_level_count_is_delimiters_plus_one(names in prop::collection::vec(item_name(), 1..8), seps in prop::collection::vec(prop::bool::ANY, 8)) {
            let mut text = String::new();
            for (i, n) in names.iter().enumerate() {
                if i > 0 {
                    text.push_str(if seps[i] { ", " } else { "; " });
                }
                text.push_str(n);
                if seps[(i + 3) % 8] {
                    text.push_str(" (x, y)");
                }
            }
            prop_assert_eq!(count_ingredients(&parse_ingredients(&text)), names.len());
        }

        #[test]
        fn parse_is_total(text in any::<String>()) {
            let t = parse_ingredients(&text);
            prop_assert!(t.all_items().iter().all(|i| !i.text.is_empty()));
        }

        #[test]
        fn case_insensitive(text in "[a-zA-Z ,()]{0,40}") {
            let lex = AdditiveLexicon::builtin();
            let lower = count_additives(&parse_ingredients(&text), &lex);
            let upper = count_additives(&parse_ingredients(&text.to_uppercase()), &lex);
            prop_assert_eq!(lower, upper);
        }

        #[test]
        fn render_round_trips_boundaries(names in prop::collection::vec(item_name(), 1..6)) {
            let text = format!("{} ({}), {}", names[0], names.join(", "), names[names.len() - 1]);
            let t = parse_ingredients(&text);
            let again = parse_ingredients(&t.render());
            prop_assert_eq!(again, t);
        }
    }

    #[test]
    fn lexicon_growth_is_monotone() {
        let full = AdditiveLexicon::builtin();
        let t = parse_ingredients(ONION_RINGS);
        let mut entries: Vec<AdditiveEntry> = Vec::new();
        let mut last = 0;
        for e in full.entries() {
            entries.push(e.clone());
            let partial = AdditiveLexicon::from_entries(entries.clone()).unwrap();
            let n = count_additives(&t, &partial);
            assert!(n >= last);
            last = n;
        }
        assert_eq!(last, count_additives(&t, &full));
    }
}
