//! Scores a hand-made prediction against ground truth.

use boundary_seg::data::CLASS_NAMES;
use boundary_seg::imaging::LabelMap;
use boundary_seg::metrics::{boundary_f1, Evaluator};
use boundary_seg::Result;

fn main() -> Result<()> {
    let gt = LabelMap::new(4, 4, vec![0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3])?;
    let pred = LabelMap::new(4, 4, vec![0, 0, 0, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 3, 3, 3])?;

    let mut eval = Evaluator::new(4, 1);
    eval.add(&pred, &gt)?;
    let report = eval.report(&CLASS_NAMES, 0.0)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    println!("strict boundary F1 (tolerance 0): {:.4}", boundary_f1(&pred, &gt, 0)?);
    Ok(())
}
