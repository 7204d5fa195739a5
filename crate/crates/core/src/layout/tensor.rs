use crate::error::{invalid_arg, Result};

/// Physical order of a [`Tensor3`] with logical axes `(p, i, j)`.
///
/// `PMajor` stores `[i][j][p]`: every `(i, j)` pair owns one contiguous
/// polynomial of `P` points. `Transposed` stores `[p][j][i]`: for each point
/// the `i` axis (the GEMM reduction or batch axis) is innermost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    PMajor,
    Transposed,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::PMajor => "pmajor",
            Layout::Transposed => "transposed",
        }
    }
}

/// Dense 3-axis tensor of residues. `p` indexes (limb, coefficient) pairs
/// limb-major: `p = limb·N + coeff`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tensor3 {
    dims: [usize; 3],
    layout: Layout,
    data: Vec<u32>,
}

impl Tensor3 {
    pub fn zeros(p: usize, i: usize, j: usize, layout: Layout) -> Self {
        Tensor3 {
            dims: [p, i, j],
            layout,
            data: vec![0; p * i * j],
        }
    }

    pub fn from_data(dims: [usize; 3], layout: Layout, data: Vec<u32>) -> Result<Self> {
        let want = dims.iter().product::<usize>();
        if data.len() != want {
            return invalid_arg(format!("tensor {dims:?} needs {want} elements, got {}", data.len()));
        }
        Ok(Tensor3 { dims, layout, data })
    }

    /// Builds a tensor by evaluating `f(p, i, j)` at every index.
    pub fn from_fn(dims: [usize; 3], layout: Layout, mut f: impl FnMut(usize, usize, usize) -> u32) -> Self {
        let mut t = Tensor3::zeros(dims[0], dims[1], dims[2], layout);
        for i in 0..dims[1] {
            for j in 0..dims[2] {
                for p in 0..dims[0] {
                    let at = t.offset(p, i, j);
                    t.data[at] = f(p, i, j);
                }
            }
        }
        t
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn layout(&self) -> Layout {
        self.layout
    }

    #[inline]
    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u32> {
        self.data
    }

    #[inline]
    pub fn offset(&self, p: usize, i: usize, j: usize) -> usize {
        let [np, ni, nj] = self.dims;
        debug_assert!(p < np && i < ni && j < nj);
        match self.layout {
            Layout::PMajor => (i * nj + j) * np + p,
            Layout::Transposed => (p * nj + j) * ni + i,
        }
    }

    #[inline]
    pub fn get(&self, p: usize, i: usize, j: usize) -> u32 {
        self.data[self.offset(p, i, j)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, i: usize, j: usize, v: u32) {
        let at = self.offset(p, i, j);
        self.data[at] = v;
    }

    /// The contiguous `P`-point fiber at `(i, j)`; PMajor only.
    pub fn fiber(&self, i: usize, j: usize) -> Option<&[u32]> {
        match self.layout {
            Layout::PMajor => {
                let np = self.dims[0];
                let start = (i * self.dims[2] + j) * np;
                Some(&self.data[start..start + np])
            }
            Layout::Transposed => None,
        }
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * 4
    }
}

/// Re-lays `src` out in `dst_layout`; a pure permutation of elements.
pub fn transpose_ct_tensor(src: &Tensor3, dst_layout: Layout) -> Tensor3 {
    if src.layout == dst_layout {
        return src.clone();
    }
    let [np, ni, nj] = src.dims;
    let mut out = Tensor3::zeros(np, ni, nj, dst_layout);
    match src.layout {
        // [i][j][p] -> [p][j][i]
        Layout::PMajor => {
            for i in 0..ni {
                for j in 0..nj {
                    let fiber = &src.data[(i * nj + j) * np..(i * nj + j + 1) * np];
                    for (p, &v) in fiber.iter().enumerate() {
                        out.data[(p * nj + j) * ni + i] = v;
                    }
                }
            }
        }
        Layout::Transposed => {
            for p in 0..np {
                for j in 0..nj {
                    let row = &src.data[(p * nj + j) * ni..(p * nj + j + 1) * ni];
                    for (i, &v) in row.iter().enumerate() {
                        out.data[(i * nj + j) * np + p] = v;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_2x2x2() {
        let t = Tensor3::from_data([2, 2, 2], Layout::PMajor, (0..8).collect()).unwrap();
        // PMajor [i][j][p]: value = (i*2 + j)*2 + p
        let tr = transpose_ct_tensor(&t, Layout::Transposed);
        // Transposed [p][j][i]
        assert_eq!(tr.data(), &[0, 4, 2, 6, 1, 5, 3, 7]);
        assert_eq!(transpose_ct_tensor(&tr, Layout::PMajor), t);
    }

    #[test]
    fn shape_checked() {
        assert!(Tensor3::from_data([2, 2, 2], Layout::PMajor, vec![0; 7]).is_err());
    }
}
