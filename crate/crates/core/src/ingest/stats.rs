use std::fmt;

use serde::Serialize;

use crate::catalog::ClassCatalog;
use crate::error::Result;
use crate::scalar::Real;
use crate::types::{Box3D, ClassId};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCount {
    pub class_id: ClassId,
    pub name: String,
    pub count: u64,
    /// Share of all labeled catalog objects, in percent.
    pub percent: f64,
}

/// Object-level class distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub rows: Vec<ClassCount>,
    pub total: u64,
}

impl ClassStats {
    pub fn row(&self, id: ClassId) -> Option<&ClassCount> {
        self.rows.iter().find(|r| r.class_id == id)
    }

    pub fn percent(&self, id: ClassId) -> f64 {
        self.row(id).map_or(0.0, |r| r.percent)
    }

    /// `class,count,percent` with percentages to two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,count,percent\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.2}\n", r.name, r.count, r.percent));
        }
        out
    }
}

impl fmt::Display for ClassStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>10}  {:>8}", "class", "count", "percent")?;
        for r in &self.rows {
            writeln!(f, "{:<width$}  {:>10}  {:>7.2}%", r.name, r.count, r.percent)?;
        }
        write!(f, "{:<width$}  {:>10}", "total", self.total)
    }
}

/// Counts labeled boxes (not frames) per catalog class. Boxes whose class is
/// not in the catalog are ignored.
pub fn dataset_stats<'a, T, I>(frames: I, catalog: &ClassCatalog) -> Result<ClassStats>
where
    T: Real,
    I: IntoIterator<Item = &'a [Box3D<T>]>,
{
    let mut counts = vec![0u64; catalog.len()];
    for boxes in frames {
        for b in boxes {
            if let Some(c) = counts.get_mut(b.class_id.index()) {
                *c += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let rows = catalog
        .ids()
        .map(|id| {
            let count = counts[id.index()];
            Ok(ClassCount {
                class_id: id,
                name: catalog.name(id)?.to_string(),
                count,
                percent: if total == 0 {
                    0.0
                } else {
                    count as f64 * 100.0 / total as f64
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassStats { rows, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxes(class: u16, n: usize) -> Vec<Box3D> {
        (0..n)
            .map(|i| Box3D::new(i as f64 * 5.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, ClassId(class)).unwrap())
            .collect()
    }

    #[test]
    fn single_frame_direct_count() {
        let c = ClassCatalog::kitti();
        let mut frame = boxes(0, 2);
        frame.extend(boxes(1, 1));
        let s = dataset_stats([frame.as_slice()], &c).unwrap();
        assert!((s.percent(ClassId(0)) - 200.0 / 3.0).abs() < 1e-12);
        assert!((s.percent(ClassId(1)) - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.percent(ClassId(2)), 0.0);
        assert_eq!(
            s.to_csv(),
            "class,count,percent\nCar,2,66.67\nPedestrian,1,33.33\nCyclist,0,0.00\n"
        );
    }

    #[test]
    fn kitti_train_split_shares() {
        // Reported KITTI train-split shares: 83.00 / 12.76 / 4.24 of 17,298 objects,
        // with 734 cyclists.
        let c = ClassCatalog::kitti();
        let frames = [boxes(0, 14357), boxes(1, 2207), boxes(2, 734)];
        let s = dataset_stats(frames.iter().map(Vec::as_slice), &c).unwrap();
        assert_eq!(s.total, 17298);
        assert!((s.percent(ClassId(0)) - 83.00).abs() < 0.01);
        assert!((s.percent(ClassId(1)) - 12.76).abs() < 0.01);
        assert!((s.percent(ClassId(2)) - 4.24).abs() < 0.01);
        let sum: f64 = s.rows.iter().map(|r| r.percent).sum();
        assert!((sum - 100.0).abs() < 0.01);
    }

    #[test]
    fn empty_dataset() {
        let s = dataset_stats(std::iter::empty::<&[Box3D]>(), &ClassCatalog::kitti()).unwrap();
        assert_eq!(s.total, 0);
        assert!(s.rows.iter().all(|r| r.count == 0 && r.percent == 0.0));
    }

    #[test]
    fn order_invariant() {
        let c = ClassCatalog::kitti();
        let frames = [boxes(0, 3), boxes(2, 1), boxes(1, 4)];
        let a = dataset_stats(frames.iter().map(Vec::as_slice), &c).unwrap();
        let b = dataset_stats(frames.iter().rev().map(Vec::as_slice), &c).unwrap();
        assert_eq!(a, b);
    }
}
