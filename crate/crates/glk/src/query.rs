//! Dynamic positional queries conditioned on guided mask embeddings, the
//! attention-pooled baseline they replace, and the reference cross-attention
//! both lean on.
//!
//! Everything here is pure dense math over `f64` matrices: parameters are
//! inputs, nothing trains in place.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guide::{soft_instance_expectation, GuideBank};
use crate::label::SoftMaskStack;
use crate::rng::Rng;

/// Content and positional query matrices of one decoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    content: Array2<f64>,
    positional: Array2<f64>,
}

impl QuerySet {
    pub fn new(content: Array2<f64>, positional: Array2<f64>) -> Result<Self> {
        if content.dim() != positional.dim() {
            return Err(Error::Shape(format!(
                "content queries are {:?} but positional queries are {:?}",
                content.dim(),
                positional.dim()
            )));
        }
        Ok(QuerySet {
            content,
            positional,
        })
    }

    pub fn n(&self) -> usize {
        self.content.nrows()
    }

    pub fn content(&self) -> ArrayView2<'_, f64> {
        self.content.view()
    }

    pub fn positional(&self) -> ArrayView2<'_, f64> {
        self.positional.view()
    }
}

/// Elementwise sum of content and positional queries.
pub fn combine_queries(qs: &QuerySet) -> Array2<f64> {
    &qs.content + &qs.positional
}

/// One affine layer of the query MLP; `weight` maps row vectors, so its shape
/// is `d_in × d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Three-layer MLP with rectified-linear activations after the first two
/// layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: [MlpLayer; 3],
}

#[derive(Serialize, Deserialize)]
struct MlpLayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpFile {
    layers: Vec<MlpLayerFile>,
}

impl MlpParams {
    pub fn new(layers: [MlpLayer; 3]) -> Result<Self> {
        for (k, layer) in layers.iter().enumerate() {
            if layer.weight.ncols() != layer.bias.len() {
                return Err(Error::Shape(format!(
                    "layer {k}: weight has {} columns but bias has {} entries",
                    layer.weight.ncols(),
                    layer.bias.len()
                )));
            }
        }
        for k in 0..2 {
            if layers[k].weight.ncols() != layers[k + 1].weight.nrows() {
                return Err(Error::Shape(format!(
                    "layer {k} outputs {} features but layer {} expects {}",
                    layers[k].weight.ncols(),
                    k + 1,
                    layers[k + 1].weight.nrows()
                )));
            }
        }
        Ok(MlpParams { layers })
    }

    /// Uniform `U(−1/√fan_in, 1/√fan_in)` weights drawn row-major, zero
    /// biases. Deterministic given the seed; intended as scaffolding for
    /// demos and tests since nothing here trains.
    pub fn init(d_in: usize, d_h: usize, d_out: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || d_h == 0 || d_out == 0 {
            return Err(Error::Config("MLP layer widths must be positive".into()));
        }
        let mut rng = Rng::seeded(seed);
        let mut layer = |rows: usize, cols: usize| -> MlpLayer {
            let bound = 1.0 / (rows as f64).sqrt();
            let weight =
                Array2::from_shape_fn((rows, cols), |_| rng.uniform(-bound, bound));
            MlpLayer {
                weight,
                bias: Array1::zeros(cols),
            }
        };
        let l0 = layer(d_in, d_h);
        let l1 = layer(d_h, d_h);
        let l2 = layer(d_h, d_out);
        MlpParams::new([l0, l1, l2])
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[2].weight.ncols()
    }

    pub fn layers(&self) -> &[MlpLayer; 3] {
        &self.layers
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = MlpFile {
            layers: self
                .layers
                .iter()
                .map(|l| MlpLayerFile {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: MlpFile = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let layers: Vec<MlpLayer> = file
            .layers
            .into_iter()
            .map(|l| {
                let rows = l.weight.len();
                let cols = l.weight.first().map_or(0, Vec::len);
                if l.weight.iter().any(|r| r.len() != cols) {
                    return Err(Error::Json {
                        path: path.to_path_buf(),
                        message: "ragged weight matrix".into(),
                    });
                }
                Ok(MlpLayer {
                    weight: Array2::from_shape_vec(
                        (rows, cols),
                        l.weight.into_iter().flatten().collect(),
                    )
                    .expect("dims agree"),
                    bias: Array1::from_vec(l.bias),
                })
            })
            .collect::<Result<_>>()?;
        let layers: [MlpLayer; 3] = layers.try_into().map_err(|_| Error::Json {
            path: path.to_path_buf(),
            message: "expected exactly three layers".into(),
        })?;
        MlpParams::new(layers)
    }
}

/// Trainable bias added to guided mask embeddings before the MLP, so it lives
/// in the embedding space, not the query space.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBias {
    values: Array1<f64>,
}

impl QueryBias {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("query bias must be finite".into()));
        }
        Ok(QueryBias { values })
    }

    pub fn zeros(d_g: usize) -> Self {
        QueryBias {
            values: Array1::zeros(d_g),
        }
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scaled dot-product cross-attention: `A = softmax(QKᵀ/√d)`, row-wise and
/// numerically stabilized, then `A·V`. Returns `(output, A)`.
pub fn cross_attention(
    q: ArrayView2<'_, f64>,
    k: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if q.ncols() != k.ncols() {
        return Err(Error::Shape(format!(
            "query width {} does not match key width {}",
            q.ncols(),
            k.ncols()
        )));
    }
    if k.nrows() != v.nrows() {
        return Err(Error::Shape(format!(
            "{} keys but {} values",
            k.nrows(),
            v.nrows()
        )));
    }
    if k.nrows() == 0 {
        return Err(Error::Shape("attention needs at least one key".into()));
    }
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut logits = q.dot(&k.t());
    logits *= scale;
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    let output = logits.dot(&v);
    Ok((output, logits))
}

/// Guided embedding of every mask layer: row `k` holds the mass-weighted
/// guide expectations of mask `k`, normalized by the stack's own grid
/// dimensions (the masks live at feature-map scale, like the guided
/// positional encoding). All-zero masks produce zero rows.
pub fn guided_mask_embeddings(bank: &GuideBank, masks: &SoftMaskStack) -> Array2<f64> {
    let (w, h) = (masks.width() as f64, masks.height() as f64);
    let mut out = Array2::zeros((masks.n(), bank.d_g()));
    for kk in 0..masks.n() {
        let layer = masks.layer(kk);
        for (i, p) in bank.params().iter().enumerate() {
            out[(kk, i)] = soft_instance_expectation(p, layer, w, h);
        }
    }
    out
}

/// Row-wise three-layer MLP.
pub fn mlp_forward(p: &MlpParams, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != p.input_dim() {
        return Err(Error::Shape(format!(
            "input width {} does not match MLP input dim {}",
            x.ncols(),
            p.input_dim()
        )));
    }
    let affine = |x: &Array2<f64>, l: &MlpLayer| x.dot(&l.weight) + &l.bias;
    let relu = |mut a: Array2<f64>| {
        a.mapv_inplace(|v| v.max(0.0));
        a
    };
    let h1 = relu(affine(&x.to_owned(), &p.layers[0]));
    let h2 = relu(affine(&h1, &p.layers[1]));
    Ok(affine(&h2, &p.layers[2]))
}

/// Guided dynamic positional queries: embed the previous block's predicted
/// masks under the guide bank, add the trainable bias, and map through the
/// MLP. One query row per mask layer.
pub fn gdpq(
    bank: &GuideBank,
    masks: &SoftMaskStack,
    mlp: &MlpParams,
    bias: &QueryBias,
) -> Result<Array2<f64>> {
    if mlp.input_dim() != bank.d_g() {
        return Err(Error::Shape(format!(
            "MLP input dim {} does not match guide count {}",
            mlp.input_dim(),
            bank.d_g()
        )));
    }
    if bias.len() != bank.d_g() {
        return Err(Error::Shape(format!(
            "bias length {} does not match guide count {}",
            bias.len(),
            bank.d_g()
        )));
    }
    let mut e = guided_mask_embeddings(bank, masks);
    e += &bias.values;
    mlp_forward(mlp, e.view())
}

/// Attention-pooled baseline: positional queries from the attention map and
/// positional keys alone, `mlp(A·K_p + bias)`.
pub fn dpq_baseline(
    a: ArrayView2<'_, f64>,
    k_p: ArrayView2<'_, f64>,
    mlp: &MlpParams,
    bias: ArrayView1<'_, f64>,
) -> Result<Array2<f64>> {
    if a.ncols() != k_p.nrows() {
        return Err(Error::Shape(format!(
            "attention map has {} columns but {} positional keys given",
            a.ncols(),
            k_p.nrows()
        )));
    }
    if bias.len() != k_p.ncols() {
        return Err(Error::Shape(format!(
            "bias length {} does not match key width {}",
            bias.len(),
            k_p.ncols()
        )));
    }
    let pooled = a.dot(&k_p) + bias;
    mlp_forward(mlp, pooled.view())
}

/// Convenience check used by demos: every row of `a` is a probability vector.
pub fn is_row_stochastic(a: ArrayView2<'_, f64>, tol: f64) -> bool {
    a.axis_iter(Axis(0)).all(|row| {
        row.iter().all(|&v| v >= 0.0) && (row.sum() - 1.0).abs() <= tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guide::{guided_embedding, init_guides};
    use crate::label::LabelMap;
    use approx::assert_relative_eq;
    use ndarray::{array, Array3};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = Rng::seeded(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.uniform(-1.0, 1.0))
    }

    #[test]
    fn identical_keys_give_uniform_attention() {
        let q = random_matrix(3, 8, 1);
        let k = Array2::from_shape_fn((5, 8), |(_, c)| c as f64 / 8.0);
        let v = random_matrix(5, 8, 2);
        let (_, a) = cross_attention(q.view(), k.view(), v.view()).unwrap();
        for row in a.rows() {
            for &x in row {
                assert_relative_eq!(x, 0.2, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn single_key_broadcasts_value() {
        let q = random_matrix(4, 6, 3);
        let k = random_matrix(1, 6, 4);
        let v = random_matrix(1, 6, 5);
        let (out, a) = cross_attention(q.view(), k.view(), v.view()).unwrap();
        assert!(a.iter().all(|&x| x == 1.0));
        for row in out.rows() {
            for (o, e) in row.iter().zip(v.row(0)) {
                assert_relative_eq!(o, e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn attention_matches_naive_recomputation() {
        let q = random_matrix(3, 8, 7);
        let k = random_matrix(5, 8, 8);
        let v = random_matrix(5, 4, 9);
        let (out, a) = cross_attention(q.view(), k.view(), v.view()).unwrap();
        assert!(is_row_stochastic(a.view(), 1e-12));

        for i in 0..3 {
            // naive row: logits, softmax, weighted sum
            let mut logits = [0.0; 5];
            for (j, logit) in logits.iter_mut().enumerate() {
                let mut dot = 0.0;
                for c in 0..8 {
                    dot += q[(i, c)] * k[(j, c)];
                }
                *logit = dot / 8f64.sqrt();
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for j in 0..5 {
                assert_relative_eq!(a[(i, j)], exps[j] / z, epsilon = 1e-12);
            }
            for c in 0..4 {
                let expected: f64 = (0..5).map(|j| exps[j] / z * v[(j, c)]).sum();
                assert_relative_eq!(out[(i, c)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn attention_rejects_mismatched_shapes() {
        let q = random_matrix(2, 4, 0);
        let k = random_matrix(3, 5, 0);
        let v = random_matrix(3, 5, 0);
        assert!(cross_attention(q.view(), k.view(), v.view()).is_err());
        let k2 = random_matrix(3, 4, 0);
        let v2 = random_matrix(2, 4, 0);
        assert!(cross_attention(q.view(), k2.view(), v2.view()).is_err());
    }

    #[test]
    fn mask_embeddings_match_hard_embeddings_on_binary_stacks() {
        let mut rng = Rng::seeded(31);
        let ids: Vec<u32> = (0..144).map(|_| rng.below(4) as u32).collect();
        let map = LabelMap::new(12, 12, ids).unwrap();
        let bank = init_guides(6, 12, 12, 2.0, 4).unwrap();
        let stack = SoftMaskStack::from_labelmap(&map);
        let e = guided_mask_embeddings(&bank, &stack);
        for (k, s) in map.instances().iter().enumerate() {
            let hard = guided_embedding(&bank, s);
            for i in 0..6 {
                assert_relative_eq!(e[(k, i)], hard.values[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_stack_embeds_to_zero_matrix() {
        let bank = init_guides(4, 8, 8, 2.0, 0).unwrap();
        let stack = SoftMaskStack::new(Array3::zeros((3, 8, 8))).unwrap();
        let e = guided_mask_embeddings(&bank, &stack);
        assert!(e.iter().all(|&v| v == 0.0));
        assert_eq!(e.dim(), (3, 4));
    }

    #[test]
    fn soft_stack_embeddings_match_per_row_recomputation() {
        let mut rng = Rng::seeded(55);
        let values = Array3::from_shape_fn((3, 6, 6), |_| rng.next_f64());
        let stack = SoftMaskStack::new(values).unwrap();
        let bank = init_guides(4, 6, 6, 2.0, 9).unwrap();
        let e = guided_mask_embeddings(&bank, &stack);
        for k in 0..3 {
            for (i, p) in bank.params().iter().enumerate() {
                let expected = soft_instance_expectation(p, stack.layer(k), 6.0, 6.0);
                assert_eq!(e[(k, i)], expected);
            }
        }
    }

    #[test]
    fn zero_mlp_maps_to_zero() {
        let zero = MlpParams::new([
            MlpLayer {
                weight: Array2::zeros((4, 6)),
                bias: Array1::zeros(6),
            },
            MlpLayer {
                weight: Array2::zeros((6, 6)),
                bias: Array1::zeros(6),
            },
            MlpLayer {
                weight: Array2::zeros((6, 8)),
                bias: Array1::zeros(8),
            },
        ])
        .unwrap();
        let x = random_matrix(3, 4, 10);
        let y = mlp_forward(&zero, x.view()).unwrap();
        assert_eq!(y.dim(), (3, 8));
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn positive_single_path_propagates_identity() {
        // 1-wide layers with unit weights: positive input survives both relus
        let unit = |n, m| MlpLayer {
            weight: Array2::from_elem((n, m), 1.0),
            bias: Array1::zeros(m),
        };
        let p = MlpParams::new([unit(1, 1), unit(1, 1), unit(1, 1)]).unwrap();
        let x = array![[0.7], [2.5]];
        let y = mlp_forward(&p, x.view()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn mlp_rows_are_independent_and_permutable() {
        let p = MlpParams::init(5, 7, 6, 42).unwrap();
        let x = random_matrix(4, 5, 11);
        let y = mlp_forward(&p, x.view()).unwrap();
        let perm = [2usize, 0, 3, 1];
        let xp = Array2::from_shape_fn((4, 5), |(r, c)| x[(perm[r], c)]);
        let yp = mlp_forward(&p, xp.view()).unwrap();
        for (r, &src) in perm.iter().enumerate() {
            assert_eq!(yp.row(r), y.row(src));
        }
    }

    #[test]
    fn mlp_rejects_wrong_input_width() {
        let p = MlpParams::init(5, 7, 6, 0).unwrap();
        let x = random_matrix(2, 4, 0);
        assert!(matches!(mlp_forward(&p, x.view()), Err(Error::Shape(_))));
    }

    #[test]
    fn mlp_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mlp.json");
        let p = MlpParams::init(4, 5, 6, 77).unwrap();
        p.save(&path).unwrap();
        assert_eq!(MlpParams::load(&path).unwrap(), p);
    }

    #[test]
    fn gdpq_zero_everything_is_zero() {
        let bank = init_guides(4, 8, 8, 2.0, 1).unwrap();
        let masks = SoftMaskStack::new(Array3::zeros((2, 8, 8))).unwrap();
        let zero_layer = |n, m| MlpLayer {
            weight: Array2::zeros((n, m)),
            bias: Array1::zeros(m),
        };
        let mlp =
            MlpParams::new([zero_layer(4, 4), zero_layer(4, 4), zero_layer(4, 8)]).unwrap();
        let q = gdpq(&bank, &masks, &mlp, &QueryBias::zeros(4)).unwrap();
        assert_eq!(q.dim(), (2, 8));
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gdpq_is_permutation_equivariant() {
        let bank = init_guides(4, 10, 10, 2.0, 6).unwrap();
        let mlp = MlpParams::init(4, 8, 12, 13).unwrap();
        let bias = QueryBias::new(Array1::from_vec(vec![0.1, -0.2, 0.3, 0.0])).unwrap();

        let mut rng = Rng::seeded(91);
        let values = Array3::from_shape_fn((4, 10, 10), |_| rng.next_f64());
        let stack = SoftMaskStack::new(values.clone()).unwrap();

        let perm = [3usize, 1, 0, 2];
        let permuted = Array3::from_shape_fn((4, 10, 10), |(k, y, x)| values[(perm[k], y, x)]);
        let stack_p = SoftMaskStack::new(permuted).unwrap();

        let q = gdpq(&bank, &stack, &mlp, &bias).unwrap();
        let qp = gdpq(&bank, &stack_p, &mlp, &bias).unwrap();
        for (k, &src) in perm.iter().enumerate() {
            assert_eq!(qp.row(k), q.row(src));
        }
    }

    #[test]
    fn gdpq_full_size_config_gives_width_256() {
        let bank = init_guides(16, 32, 32, 2.0, 2).unwrap();
        let mlp = MlpParams::init(16, 256, 256, 3).unwrap();
        let mut rng = Rng::seeded(14);
        let values = Array3::from_shape_fn((5, 16, 16), |_| rng.next_f64());
        let stack = SoftMaskStack::new(values).unwrap();
        let q = gdpq(&bank, &stack, &mlp, &QueryBias::zeros(16)).unwrap();
        assert_eq!(q.dim(), (5, 256));
    }

    #[test]
    fn dpq_uniform_attention_collapses_rows() {
        let a = Array2::from_elem((3, 4), 0.25);
        let k_p = Array2::from_shape_fn((4, 5), |(_, c)| c as f64);
        let mlp = MlpParams::init(5, 6, 7, 21).unwrap();
        let bias = Array1::zeros(5);
        let q = dpq_baseline(a.view(), k_p.view(), &mlp, bias.view()).unwrap();
        for r in 1..3 {
            assert_eq!(q.row(r), q.row(0));
        }
    }

    #[test]
    fn dpq_matches_naive_recomputation() {
        let a = {
            // arbitrary non-negative rows summing to 1
            let raw = random_matrix(3, 6, 33).mapv(f64::abs);
            let sums = raw.sum_axis(Axis(1));
            Array2::from_shape_fn((3, 6), |(r, c)| raw[(r, c)] / sums[r])
        };
        let k_p = random_matrix(6, 5, 34);
        let bias = Array1::from_vec(vec![0.1, 0.2, -0.3, 0.0, 0.5]);
        let mlp = MlpParams::init(5, 4, 7, 35).unwrap();

        let q = dpq_baseline(a.view(), k_p.view(), &mlp, bias.view()).unwrap();

        let mut pooled = Array2::zeros((3, 5));
        for r in 0..3 {
            for c in 0..5 {
                let mut acc = bias[c];
                for j in 0..6 {
                    acc += a[(r, j)] * k_p[(j, c)];
                }
                pooled[(r, c)] = acc;
            }
        }
        let expected = mlp_forward(&mlp, pooled.view()).unwrap();
        for (got, want) in q.iter().zip(expected.iter()) {
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn combine_is_elementwise_sum() {
        let content = random_matrix(3, 4, 40);
        let positional = random_matrix(3, 4, 41);
        let qs = QuerySet::new(content.clone(), positional.clone()).unwrap();
        let sum = combine_queries(&qs);
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(sum[(r, c)], content[(r, c)] + positional[(r, c)]);
            }
        }

        let zero = Array2::zeros((3, 4));
        let qs2 = QuerySet::new(content.clone(), zero.clone()).unwrap();
        assert_eq!(combine_queries(&qs2), content);
        let qs3 = QuerySet::new(zero, positional.clone()).unwrap();
        assert_eq!(combine_queries(&qs3), positional);
    }

    #[test]
    fn query_set_rejects_mismatched_dims() {
        assert!(QuerySet::new(Array2::zeros((2, 3)), Array2::zeros((3, 2))).is_err());
    }
}
