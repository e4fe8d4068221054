use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Model parameters and fast/slow iterates.
pub type Weights = DVector<f64>;

/// A single example `z = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub x: DVector<f64>,
    pub y: f64,
}

impl DataPoint {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        DataPoint { x: DVector::from_vec(x), y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// An ordered training sample. Positions are meaningful: neighbouring
/// datasets are built by replacing the point at a given index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyDataset)?;
        let d = first.dim();
        if let Some(bad) = points.iter().find(|p| p.dim() != d) {
            return Err(Error::Dimension { expected: d, got: bad.dim() });
        }
        Ok(Dataset { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Result<&DataPoint> {
        self.points
            .get(index)
            .ok_or(Error::IndexOutOfRange { index, n: self.len() })
    }

    /// Copy of `self` with position `index` replaced by `z`.
    pub fn with_replaced(&self, index: usize, z: DataPoint) -> Result<Dataset> {
        self.get(index)?;
        if z.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: z.dim() });
        }
        let mut points = self.points.clone();
        points[index] = z;
        Ok(Dataset { points })
    }

    /// Writes the dataset as CSV with header `x_0,...,x_{d-1},y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim())
            .map(|j| format!("x_{j}"))
            .chain(std::iter::once("y".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let row: Vec<String> = p
                .x
                .iter()
                .chain(std::iter::once(&p.y))
                .map(|v| crate::experiments::csv::fmt_f64(*v))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
