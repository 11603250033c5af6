//! Index arithmetic for flat d-dimensional tensors stored row-major with the
//! last axis fastest.

/// Strides for a row-major layout, last axis fastest.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let d = dims.len();
    let mut s = vec![1usize; d];
    for l in (0..d.saturating_sub(1)).rev() {
        s[l] = s[l + 1] * dims[l + 1];
    }
    s
}

pub(crate) fn ravel(index: &[usize], strides: &[usize]) -> usize {
    index.iter().zip(strides).map(|(i, s)| i * s).sum()
}

/// Lexicographic iteration over all multi-indices of `dims`.
pub(crate) struct MultiIndexIter {
    dims: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl MultiIndexIter {
    pub(crate) fn new(dims: &[usize]) -> Self {
        let done = dims.contains(&0);
        MultiIndexIter {
            dims: dims.to_vec(),
            current: vec![0; dims.len()],
            done,
        }
    }
}

impl Iterator for MultiIndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        // odometer increment, last axis fastest
        let mut l = self.dims.len();
        loop {
            if l == 0 {
                self.done = true;
                break;
            }
            l -= 1;
            self.current[l] += 1;
            if self.current[l] < self.dims[l] {
                break;
            }
            self.current[l] = 0;
        }
        Some(out)
    }
}

/// Apply a 1-D transform along `axis` of a flat tensor, producing a tensor
/// whose extent along that axis is `out_extent`. The transform receives one
/// gathered input line and writes one output line.
pub(crate) fn map_axis(
    values: &[f64],
    dims: &[usize],
    axis: usize,
    out_extent: usize,
    mut transform: impl FnMut(&[f64], &mut [f64]),
) -> (Vec<f64>, Vec<usize>) {
    let in_strides = strides(dims);
    let mut out_dims = dims.to_vec();
    out_dims[axis] = out_extent;
    let out_strides = strides(&out_dims);
    let mut out = vec![0.0; out_dims.iter().product()];

    let outer: Vec<usize> = (0..dims.len()).filter(|&l| l != axis).collect();
    let outer_dims: Vec<usize> = outer.iter().map(|&l| dims[l]).collect();
    let mut in_line = vec![0.0; dims[axis]];
    let mut out_line = vec![0.0; out_extent];

    for idx in MultiIndexIter::new(&outer_dims) {
        let mut in_base = 0usize;
        let mut out_base = 0usize;
        for (k, &l) in outer.iter().enumerate() {
            in_base += idx[k] * in_strides[l];
            out_base += idx[k] * out_strides[l];
        }
        for i in 0..dims[axis] {
            in_line[i] = values[in_base + i * in_strides[axis]];
        }
        transform(&in_line, &mut out_line);
        for (i, &v) in out_line.iter().enumerate() {
            out[out_base + i * out_strides[axis]] = v;
        }
    }
    (out, out_dims)
}
