use rand::Rng;

/// One named matrix (or vector, `cols == 1`) inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    /// Initialization bound; zero means the block starts at zero.
    pub init_bound: f64,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named blocks laid end to end in one `Vec<f64>`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamLayout {
    blocks: Vec<ParamBlock>,
    len: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a weight block initialized uniformly in `(−bound, bound)`.
    pub fn weight(&mut self, name: impl Into<String>, rows: usize, cols: usize, bound: f64) -> usize {
        self.push(name.into(), rows, cols, bound)
    }

    /// Append a zero-initialized block.
    pub fn bias(&mut self, name: impl Into<String>, len: usize) -> usize {
        self.push(name.into(), len, 1, 0.0)
    }

    fn push(&mut self, name: String, rows: usize, cols: usize, bound: f64) -> usize {
        let offset = self.len;
        self.blocks.push(ParamBlock {
            name,
            offset,
            rows,
            cols,
            init_bound: bound,
        });
        self.len += rows * cols;
        offset
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Block containing flat index `index`.
    pub fn block_at(&self, index: usize) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.range().contains(&index))
    }

    /// Fresh parameters: weights uniform in `(−bound, bound)`, biases zero.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = vec![0.0; self.len];
        for b in &self.blocks {
            let bound = b.init_bound;
            if bound > 0.0 {
                for v in &mut params[b.range()] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        params
    }
}
