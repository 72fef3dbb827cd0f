//! Builds dynamic positional queries from a soft mask stack and shows that
//! reordering the masks reorders the query rows and nothing else.

use ndarray::{Array3, Axis};

use glk::guide::init_guides;
use glk::label::SoftMaskStack;
use glk::query::{gdpq, guided_mask_embeddings, MlpParams, QueryBias};

fn main() -> glk::Result<()> {
    let (n, h, w) = (3usize, 12usize, 12usize);
    // three blurry blobs at different corners
    let values = Array3::from_shape_fn((n, h, w), |(k, y, x)| {
        let (cy, cx) = [(3.0, 3.0), (3.0, 9.0), (9.0, 6.0)][k];
        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
        (-d2 / 8.0).exp()
    });
    let stack = SoftMaskStack::new(values.clone())?;

    let bank = init_guides(4, w, h, 2.0, 21)?;
    let embeddings = guided_mask_embeddings(&bank, &stack);
    println!("soft guided embeddings, one row per mask:");
    for (k, row) in embeddings.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:+.4}")).collect();
        println!("  mask {k}: [{}]", cells.join(", "));
    }

    let mlp = MlpParams::init(bank.d_g(), 16, 8, 7)?;
    let bias = QueryBias::zeros(bank.d_g());
    let queries = gdpq(&bank, &stack, &mlp, &bias)?;
    println!("\nqueries after the three-layer map (width {}):", queries.ncols());
    for (k, row) in queries.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().take(4).map(|v| format!("{v:+.4}")).collect();
        println!("  query {k}: [{}, ...]", cells.join(", "));
    }

    // swap the first two masks; the query rows swap identically
    let mut swapped = values;
    let top = swapped.index_axis(Axis(0), 0).to_owned();
    let mid = swapped.index_axis(Axis(0), 1).to_owned();
    swapped.index_axis_mut(Axis(0), 0).assign(&mid);
    swapped.index_axis_mut(Axis(0), 1).assign(&top);
    let queries_swapped = gdpq(&bank, &SoftMaskStack::new(swapped)?, &mlp, &bias)?;
    let rows_track = queries_swapped.row(0) == queries.row(1)
        && queries_swapped.row(1) == queries.row(0)
        && queries_swapped.row(2) == queries.row(2);
    println!("\nswapping masks 0 and 1 swaps query rows 0 and 1 exactly: {rows_track}");
    Ok(())
}
