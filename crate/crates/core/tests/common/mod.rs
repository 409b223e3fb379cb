#![allow(dead_code)]

use gcaa_core::model::{AgentState, CostTable, Scenario, Task};
use gcaa_core::{CommunicationGraph, Vec2};

/// Four agents, two tasks. A1 and A3 cannot hear each other.
///
/// Singleton utilities (reward * p - cost):
///
/// | agent | T1          | T2          |
/// |-------|-------------|-------------|
/// | A1    | 7.5-2.5 = 5 | 6-1 = 5     |
/// | A2    | 8.75-1.75=7 | 1-5 < 0     |
/// | A3    | 7.5-1.5 = 6 | 7-1 = 6     |
/// | A4    | 8.75-2.75=6 | 4-4.5 < 0   |
///
/// Once A2 holds T1 the others' marginal on T1 drops below zero.
pub struct Fig2 {
    pub scenario: Scenario,
    pub costs: CostTable,
    pub graph: CommunicationGraph,
}

pub fn fig2() -> Fig2 {
    let agents = (0..4).map(|i| AgentState::new(i, Vec2::new(i as f64 * 0.1, 0.0), Vec2::zeros())).collect();
    let tasks = vec![
        Task::fixed(0, Vec2::new(0.5, 0.5), 10.0, 9.0),
        Task::fixed(1, Vec2::new(0.2, 0.8), 8.0, 9.0),
    ];
    let success = vec![vec![0.75, 0.75], vec![0.875, 0.125], vec![0.75, 0.875], vec![0.875, 0.5]];
    let scenario = Scenario::new(agents, tasks, success, 10.0, 100);
    let costs = CostTable::from_rows(&[vec![2.5, 1.0], vec![1.75, 5.0], vec![1.5, 1.0], vec![2.75, 4.5]]);
    let graph = CommunicationGraph::from_edges(4, &[(0, 1), (1, 2), (1, 3), (0, 3), (2, 3)]);
    Fig2 { scenario, costs, graph }
}

/// Spearman rank correlation without tie correction beyond average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
