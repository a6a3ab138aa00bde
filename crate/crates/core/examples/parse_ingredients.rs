//! Parse a nested ingredient list and count the additives it declares.

use fproxkit::ingredients::{count_ingredients, matched_additives, parse_ingredients, AdditiveLexicon};

const TEXT: &str = "Diced onions, enriched wheat flour (wheat flour, niacin, ferrous sulfate, \
thiamine mononitrate, riboflavin, folic acid), vegetable oil (soybean and / or canola), corn starch, \
wheat flour, water, modified corn starch, contains 2% or less of calcium chloride, caramel color, \
cellulose gum, leavening (sodium aluminum phosphate, sodium bicarbonate), oleoresin paprika (color), \
salt, sodium alginate, spice, sugar, whey, yeast, yellow corn flour.";

fn main() {
    let text = std::env::args().nth(1).unwrap_or_else(|| TEXT.to_string());
    let tree = parse_ingredients(&text);
    println!("{}", tree.render());
    println!("{} ingredients, nesting depth {}", count_ingredients(&tree), tree.depth());

    let lexicon = AdditiveLexicon::builtin();
    for (name, code) in matched_additives(&tree, &lexicon) {
        println!("  {code}  {name}");
    }
}
