use crate::pcm::{Device, DifferentialSynapse, SynapseArray};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Potentiate,
    Depress,
}

/// Visible × hidden synapse grid with cached row-major and column-major
/// weight reads. The caches are derived from the cells and refreshed on
/// every programming event.
#[derive(Debug, Clone)]
pub struct Crossbar {
    array: SynapseArray,
    by_row: Vec<f64>,
    by_col: Vec<f64>,
}

impl Crossbar {
    pub fn new(array: SynapseArray) -> Self {
        let (rows, cols) = (array.rows, array.cols);
        let by_row: Vec<f64> = array.cells.iter().map(|s| array.device.read_weight(s)).collect();
        let mut by_col = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                by_col[j * rows + i] = by_row[i * cols + j];
            }
        }
        Self { array, by_row, by_col }
    }

    pub fn filled(rows: usize, cols: usize, device: Device, value: DifferentialSynapse) -> Self {
        Self::new(SynapseArray::filled(rows, cols, device, value))
    }

    pub fn rows(&self) -> usize {
        self.array.rows
    }

    pub fn cols(&self) -> usize {
        self.array.cols
    }

    pub fn synapse_count(&self) -> usize {
        self.array.cells.len()
    }

    pub fn device(&self) -> &Device {
        &self.array.device
    }

    pub fn array(&self) -> &SynapseArray {
        &self.array
    }

    pub fn into_array(self) -> SynapseArray {
        self.array
    }

    pub fn synapse(&self, i: usize, j: usize) -> &DifferentialSynapse {
        self.array.get(i, j)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.by_row[i * self.cols() + j]
    }

    /// Weights from visible `i` to every hidden neuron.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.by_row[i * c..(i + 1) * c]
    }

    /// Weights from hidden `j` to every visible neuron.
    pub fn col(&self, j: usize) -> &[f64] {
        let r = self.rows();
        &self.by_col[j * r..(j + 1) * r]
    }

    pub fn weights(&self) -> &[f64] {
        &self.by_row
    }

    pub fn set(&mut self, i: usize, j: usize, s: DifferentialSynapse) {
        let c = self.cols();
        self.array.cells[i * c + j] = s;
        self.sync(i, j);
    }

    /// Programs one synapse; returns whether its weight changed.
    pub fn update(&mut self, i: usize, j: usize, dir: Direction, magnitude: u32) -> bool {
        let c = self.cols();
        let cell = &mut self.array.cells[i * c + j];
        let changed = match dir {
            Direction::Potentiate => self.array.device.potentiate(cell, magnitude),
            Direction::Depress => self.array.device.depress(cell, magnitude),
        };
        if changed {
            self.sync(i, j);
        }
        changed
    }

    fn sync(&mut self, i: usize, j: usize) {
        let (r, c) = (self.rows(), self.cols());
        let w = self.array.device.read_weight(&self.array.cells[i * c + j]);
        self.by_row[i * c + j] = w;
        self.by_col[j * r + i] = w;
    }
}
