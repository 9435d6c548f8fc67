//! Synthetic Java-like corpora for desk-scale experiments.
//!
//! Three generators share one code writer:
//!
//! * [`CorpusKind::Task`]: methods from a shape-drawing GUI assignment,
//!   labeled good or bad. Bad methods carry at least three of the five
//!   defect signals measured by [`DefectProfile`](super::signals::DefectProfile);
//!   good methods carry none.
//! * [`CorpusKind::Domain`]: GUI-framework code of the same flavour but a
//!   different style (controls, event handlers, scenes).
//! * [`CorpusKind::Generic`]: general-purpose Java (algorithms, strings,
//!   collections) sharing little vocabulary with the task.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::dataset::{Dataset, Label, MethodSample, Split};
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Task,
    Domain,
    Generic,
}

impl std::str::FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "task" => Ok(CorpusKind::Task),
            "domain" => Ok(CorpusKind::Domain),
            "generic" => Ok(CorpusKind::Generic),
            other => Err(Error::InvalidArgument(format!("unknown corpus kind `{other}`"))),
        }
    }
}

/// Labeled task corpus with `round(n * bad_fraction)` bad methods, all in
/// the `unlabeled` split until [`split_dataset`](super::split_dataset) runs.
pub fn synthesize_corpus(n: usize, bad_fraction: f64, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::InvalidArgument(format!("corpus size must be at least 10, got {n}")));
    }
    if !(bad_fraction > 0.0 && bad_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bad fraction must be in (0, 1), got {bad_fraction}"
        )));
    }
    let n_bad = (n as f64 * bad_fraction).round() as usize;
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_bad { Label::Bad } else { Label::Good })
        .collect();
    let mut rng = rng_from_seed(seed);
    labels.shuffle(&mut rng);

    let mut seen = HashSet::new();
    let mut samples = Vec::with_capacity(n);
    for label in labels {
        let sample = unique(&mut rng, &mut seen, |rng| task_method(rng, label));
        samples.push(MethodSample::new(sample.1, sample.0, Some(label), Split::Unlabeled));
    }
    Dataset::new(samples)
}

/// Unlabeled corpus of `n` distinct methods of the given kind. Task corpora
/// mix good and bad methods 70/30.
pub fn synthesize_unlabeled(kind: CorpusKind, n: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let mut seen = HashSet::new();
    let samples = (0..n)
        .map(|_| {
            let (name, source) = unique(&mut rng, &mut seen, |rng| match kind {
                CorpusKind::Task => {
                    let label = if rng.random_bool(0.3) { Label::Bad } else { Label::Good };
                    task_method(rng, label)
                }
                CorpusKind::Domain => domain_method(rng),
                CorpusKind::Generic => generic_method(rng),
            });
            MethodSample::new(source, name, None, Split::Unlabeled)
        })
        .collect();
    Dataset { samples }
}

fn unique(
    rng: &mut Rng,
    seen: &mut HashSet<String>,
    mut make: impl FnMut(&mut Rng) -> (String, String),
) -> (String, String) {
    loop {
        let (name, source) = make(rng);
        if seen.insert(source.clone()) {
            return (name, source);
        }
    }
}

/// Line-oriented code writer with brace-tracked indentation.
struct Code {
    lines: Vec<String>,
    indent: usize,
    seen: HashSet<String>,
}

impl Code {
    fn new(signature: String) -> Self {
        Self {
            lines: vec![format!("{signature} {{")],
            indent: 1,
            seen: HashSet::new(),
        }
    }

    fn push(&mut self, line: &str) {
        self.lines.push(format!("{}{}", "    ".repeat(self.indent), line));
    }

    /// Pushes `line` unless an identical statement was already written.
    fn push_unique(&mut self, line: String) -> bool {
        if self.seen.insert(line.clone()) {
            self.push(&line);
            true
        } else {
            false
        }
    }

    fn open(&mut self, header: String) {
        self.seen.insert(header.clone());
        self.push(&format!("{header} {{"));
        self.indent += 1;
    }

    fn close(&mut self) {
        self.indent -= 1;
        self.push("}");
    }

    fn len(&self) -> usize {
        self.lines.len()
    }

    fn finish(mut self) -> String {
        while self.indent > 1 {
            self.close();
        }
        self.lines.push("}".to_string());
        self.lines.join("\n")
    }
}

fn pick<'a>(rng: &mut Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty pool")
}

const SHAPE_TYPES: &[&str] = &["Triangle", "Circle", "Rectangle", "Polygon", "Shape"];
const COLORS: &[&str] = &["RED", "BLUE", "GREEN", "YELLOW", "BLACK", "ORANGE", "PURPLE", "GRAY"];
const VERBS: &[&str] = &[
    "draw", "clear", "update", "reset", "move", "place", "remove", "add", "select", "highlight", "refresh",
    "toggle", "paint", "resize", "count", "find",
];
const NOUNS: &[&str] = &[
    "Board", "Triangle", "Shapes", "Center", "Score", "Selection", "Positions", "Colors", "Grid", "Label",
    "Circle", "Corners", "History", "Layout",
];
const COLLECTIONS: &[&str] = &["shapes", "triangles", "positions", "history", "selected", "namedList", "colorMap", "corners"];
const DESCRIPTIVE_VARS: &[&str] = &[
    "shape", "triangle", "position", "corner", "fillColor", "current", "target", "marker", "outline", "area",
    "offset", "width", "height", "index", "count", "total", "label", "entry", "item", "point",
];
const SINGLE_LETTERS: &[&str] = &["a", "b", "c", "d", "t", "x", "y", "z", "n", "k", "p", "q"];
const PARAM_TYPES: &[&str] = &["int", "double", "Color", "Position", "String", "boolean", "Triangle"];

fn task_method(rng: &mut Rng, label: Label) -> (String, String) {
    match label {
        Label::Good => good_task_method(rng),
        Label::Bad => bad_task_method(rng),
    }
}

fn descriptive_name(rng: &mut Rng) -> String {
    format!("{}{}", pick(rng, VERBS), pick(rng, NOUNS))
}

/// One of a family of descriptive single statements about the board.
fn task_statement(rng: &mut Rng, var: &str) -> String {
    let collection = pick(rng, COLLECTIONS);
    let shape = pick(rng, SHAPE_TYPES);
    let color = pick(rng, COLORS);
    match rng.random_range(0..12) {
        0 => format!("{shape} {var} = {collection}.get(selectedIndex);"),
        1 => format!("center.getChildren().add({var});"),
        2 => format!("{var}.setFill(Color.{color});"),
        3 => format!("{collection}.clear();"),
        4 => format!("scoreLabel.setText(\"Shapes: \" + {collection}.size());"),
        5 => format!("{var}.setLayoutX(origin.getX() + {});", rng.random_range(1..200)),
        6 => format!("{var}.setLayoutY(origin.getY() + {});", rng.random_range(1..200)),
        7 => format!("center.getChildren().remove({var});"),
        8 => format!("{collection}.add({var});"),
        9 => format!("{var}.setStroke(Color.{color});"),
        10 => format!("statusLabel.setText(\"{}\");", pick(rng, &["Ready", "Moved", "Cleared", "Selected", "Saved"])),
        _ => format!("{var}.setRotate({var}.getRotate() + {});", rng.random_range(5..90)),
    }
}

fn good_task_method(rng: &mut Rng) -> (String, String) {
    let name = descriptive_name(rng);
    let n_params = rng.random_range(0..=3);
    let mut used: Vec<&str> = DESCRIPTIVE_VARS.to_vec();
    used.shuffle(rng);
    let params: Vec<String> = used[..n_params]
        .iter()
        .map(|p| format!("{} {}", pick(rng, PARAM_TYPES), p))
        .collect();
    let returns_count = rng.random_bool(0.25);
    let ret = if returns_count { "int" } else { "void" };
    let visibility = pick(rng, &["public", "private", "protected"]);
    let mut code = Code::new(format!("{visibility} {ret} {name}({})", params.join(", ")));
    if rng.random_bool(0.2) {
        code.lines.insert(0, "@Override".to_string());
    }
    let var = used[n_params];
    let shape = pick(rng, SHAPE_TYPES);

    let head = rng.random_range(1..=3);
    for _ in 0..head {
        let stmt = task_statement(rng, var);
        code.push_unique(stmt);
    }
    if rng.random_bool(0.6) {
        // Iterate over values, never entries, when only values are needed.
        let collection = pick(rng, &["shapeMap", "positionMap", "colorMap"]);
        let item = used[n_params + 1];
        code.open(format!("for ({shape} {item} : {collection}.values())"));
        for _ in 0..rng.random_range(1..=3) {
            let stmt = task_statement(rng, item);
            code.push_unique(stmt);
        }
        if rng.random_bool(0.4) {
            code.open(format!("if ({item}.isVisible())"));
            let stmt = task_statement(rng, item);
            code.push_unique(stmt);
            code.close();
        }
        code.close();
    }
    for _ in 0..rng.random_range(0..=3) {
        let stmt = task_statement(rng, var);
        code.push_unique(stmt);
    }
    if returns_count {
        code.push(&format!("return {}.size();", pick(rng, COLLECTIONS)));
    }
    (name, code.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Defect {
    DeepNesting,
    ManyParameters,
    SingleLetterNames,
    DuplicatedBlock,
    LongMethod,
}

const DEFECTS: [Defect; 5] = [
    Defect::DeepNesting,
    Defect::ManyParameters,
    Defect::SingleLetterNames,
    Defect::DuplicatedBlock,
    Defect::LongMethod,
];

fn bad_task_method(rng: &mut Rng) -> (String, String) {
    let mut defects = DEFECTS.to_vec();
    defects.shuffle(rng);
    let k = if rng.random_bool(0.25) { 4 } else { 3 };
    defects.truncate(k);
    let has = |d: Defect| defects.contains(&d);

    let short = has(Defect::SingleLetterNames);
    let mut pool: Vec<&str> = if short { SINGLE_LETTERS.to_vec() } else { DESCRIPTIVE_VARS.to_vec() };
    pool.shuffle(rng);
    let mut names = pool.into_iter().cycle();

    let name = if short && rng.random_bool(0.3) {
        pick(rng, &["m", "f", "g", "h"]).to_string()
    } else {
        pick(rng, &["doIt", "handle", "process", "stuff", "run2", "update", "doStuff", "method1", "fix"]).to_string()
    };
    let n_params = if has(Defect::ManyParameters) { rng.random_range(6..=8) } else { rng.random_range(0..=2) };
    let params: Vec<String> = (0..n_params)
        .map(|i| {
            let pname = if short {
                SINGLE_LETTERS[i % SINGLE_LETTERS.len()].to_string()
            } else {
                format!("{}{}", pick(rng, &["value", "pos", "size", "flag", "color", "text", "step", "limit"]), i + 1)
            };
            format!("{} {}", pick(rng, PARAM_TYPES), pname)
        })
        .collect();
    let mut code = Code::new(format!("public void {name}({})", params.join(", ")));
    let var = names.next().unwrap();

    if short {
        code.push_unique(format!("Triangle {var} = triangles.get({});", rng.random_range(0..9)));
    }
    let uses_entries = rng.random_bool(0.5);
    if uses_entries {
        // The entry set is walked although only values are used.
        let entry = names.next().unwrap();
        let value = names.next().unwrap();
        code.open(format!("for (Entry<Position, Triangle> {entry} : pt.entrySet())"));
        code.push_unique(format!("Triangle {value} = {entry}.getValue();"));
        code.push_unique(format!("center.getChildren().remove({value});"));
        code.close();
    } else {
        for _ in 0..2 {
            let stmt = task_statement(rng, var);
            code.push_unique(stmt);
        }
    }

    if has(Defect::DeepNesting) {
        let depth = rng.random_range(4..=5);
        let mut loop_var = var;
        for level in 0..depth {
            let header = match level % 3 {
                0 => {
                    loop_var = names.next().unwrap();
                    format!("for (Triangle {loop_var} : triangles)")
                }
                1 => format!("if ({loop_var}.getFill() != Color.{})", pick(rng, COLORS)),
                _ => format!("if ({loop_var}.getLayoutX() > {})", rng.random_range(1..500)),
            };
            code.open(header);
        }
        let stmt = task_statement(rng, loop_var);
        code.push_unique(stmt);
        for _ in 0..depth {
            code.close();
        }
    }

    if has(Defect::DuplicatedBlock) {
        let block: Vec<String> = (0..rng.random_range(2..=3)).map(|_| task_statement(rng, var)).collect();
        let spacer = format!("{}.clear();", pick(rng, COLLECTIONS));
        for line in &block {
            code.push(line);
        }
        code.push(&spacer);
        for line in &block {
            code.push(line);
        }
    }

    if has(Defect::LongMethod) {
        let mut guard = 0;
        while code.len() < 42 && guard < 1000 {
            let stmt = task_statement(rng, var);
            code.push_unique(stmt);
            guard += 1;
        }
    } else {
        for _ in 0..rng.random_range(0..=2) {
            let stmt = task_statement(rng, var);
            code.push_unique(stmt);
        }
    }
    if !uses_entries || rng.random_bool(0.5) {
        code.push("cl.clear(); namedList.clear(); pt.clear();");
    }
    (name, code.finish())
}

const CONTROLS: &[&str] = &["Button", "TextField", "CheckBox", "Slider", "ComboBox", "Label", "MenuItem"];
const CONTAINERS: &[&str] = &["root", "toolbar", "sidebar", "statusBar", "menuBar", "grid"];

fn domain_method(rng: &mut Rng) -> (String, String) {
    let control = pick(rng, CONTROLS);
    let purpose = pick(rng, &["save", "open", "zoom", "export", "undo", "redo", "search", "settings"]);
    let cap = format!("{}{}", purpose[..1].to_uppercase(), &purpose[1..]);
    let var = format!("{purpose}{control}");
    let style = rng.random_range(0..3);
    let name = match style {
        0 => format!("init{cap}{control}"),
        1 => format!("on{cap}Requested"),
        _ => format!("build{cap}Scene"),
    };
    let mut code = match style {
        1 => Code::new(format!("private void {name}(ActionEvent event)")),
        2 => Code::new(format!("public Scene {name}(Stage stage)")),
        _ => Code::new(format!("private void {name}()")),
    };
    match style {
        0 => {
            code.push_unique(format!("{control} {var} = new {control}(\"{cap}\");"));
            code.push_unique(format!("{var}.setOnAction(event -> handle{cap}());"));
            code.push_unique(format!("{var}.setTooltip(new Tooltip(\"{cap} the document\"));"));
            if rng.random_bool(0.5) {
                code.push_unique(format!("{var}.setDisable(!document.isLoaded());"));
            }
            code.push_unique(format!("{}.getChildren().add({var});", pick(rng, CONTAINERS)));
        }
        1 => {
            code.open("if (event.getSource() instanceof Button)".to_string());
            code.push_unique(format!("statusBar.setText(\"{cap} started\");"));
            code.close();
            code.open("Platform.runLater(() ->".to_string());
            code.push_unique(format!("controller.{purpose}(document);"));
            code.indent -= 1;
            code.push("});");
            code.push_unique(format!("event.consume();"));
        }
        _ => {
            let pane = pick(rng, &["BorderPane", "VBox", "HBox", "StackPane", "GridPane"]);
            code.push_unique(format!("{pane} layout = new {pane}();"));
            code.push_unique(format!("layout.getChildren().addAll({});", CONTAINERS[..rng.random_range(1..4)].join(", ")));
            code.push_unique(format!(
                "Scene scene = new Scene(layout, {}, {});",
                rng.random_range(4..12) * 100,
                rng.random_range(3..9) * 100
            ));
            code.push_unique(format!("scene.getStylesheets().add(\"{purpose}.css\");"));
            code.push_unique(format!("stage.setTitle(\"{cap}\");"));
            code.push("return scene;");
        }
    }
    (name, code.finish())
}

fn generic_method(rng: &mut Rng) -> (String, String) {
    let style = rng.random_range(0..5);
    let suffix = rng.random_range(0..100);
    let (name, src) = match style {
        0 => {
            let op = pick(rng, &["+", "*", "-", "^"]);
            let name = format!("accumulate{suffix}");
            let src = format!(
                "public static long {name}(long[] values) {{\n    long result = {};\n    for (int i = 0; i < values.length; i++) {{\n        result = result {op} values[i];\n    }}\n    return result;\n}}",
                rng.random_range(0..3)
            );
            (name, src)
        }
        1 => {
            let name = format!("joinWords{suffix}");
            let sep = pick(rng, &[", ", "; ", " | ", "-", "/"]);
            let src = format!(
                "static String {name}(List<String> words) {{\n    StringBuilder builder = new StringBuilder();\n    for (String word : words) {{\n        if (builder.length() > 0) {{\n            builder.append(\"{sep}\");\n        }}\n        builder.append(word.trim());\n    }}\n    return builder.toString();\n}}"
            );
            (name, src)
        }
        2 => {
            let name = format!("fibonacci{suffix}");
            let src = format!(
                "public static int {name}(int n) {{\n    if (n < {}) {{\n        return n;\n    }}\n    int previous = 0, current = 1;\n    for (int step = 1; step < n; step++) {{\n        int next = previous + current;\n        previous = current;\n        current = next;\n    }}\n    return current;\n}}",
                rng.random_range(2..4)
            );
            (name, src)
        }
        3 => {
            let name = format!("readLines{suffix}");
            let src = format!(
                "List<String> {name}(Path path) throws IOException {{\n    try (BufferedReader reader = Files.newBufferedReader(path)) {{\n        return reader.lines().filter(line -> !line.isEmpty()).limit({}).collect(Collectors.toList());\n    }}\n}}",
                rng.random_range(10..1000)
            );
            (name, src)
        }
        _ => {
            let name = format!("maxOf{suffix}");
            let src = format!(
                "public static double {name}(double[] data) {{\n    double best = Double.NEGATIVE_INFINITY;\n    for (double value : data) {{\n        best = Math.max(best, value * {});\n    }}\n    return best;\n}}",
                rng.random_range(1..10)
            );
            (name, src)
        }
    };
    (name, src)
}
