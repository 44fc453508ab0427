#![allow(dead_code)]

use iwasawa::group::{GroupModel, ModelSpec};
use iwasawa::iwasawa::TruncationSpec;
use std::sync::Arc;

pub fn abelian_model(p: u64, d: usize, m: u32) -> Arc<GroupModel> {
    Arc::new(GroupModel::load(&ModelSpec::Abelian { p, d, m, omega: vec!["1".into(); d] }).unwrap())
}

pub fn heisenberg_model(m: u32) -> Arc<GroupModel> {
    let generators = vec![
        vec![vec![1, 5, 0], vec![0, 1, 0], vec![0, 0, 1]],
        vec![vec![1, 0, 0], vec![0, 1, 5], vec![0, 0, 1]],
        vec![vec![1, 0, 5], vec![0, 1, 0], vec![0, 0, 1]],
    ];
    let spec = ModelSpec::Unitriangular {
        p: 5,
        n: 3,
        m,
        generators,
        omega: vec!["1".into(), "1".into(), "2".into()],
        centre: Some(vec![2]),
    };
    Arc::new(GroupModel::load(&spec).unwrap())
}

pub fn abelian(p: u64, d: usize, w: i64, m: u32) -> Arc<TruncationSpec> {
    TruncationSpec::new(abelian_model(p, d, m), w).unwrap()
}

pub fn heisenberg(w: i64) -> Arc<TruncationSpec> {
    TruncationSpec::new(heisenberg_model(3), w).unwrap()
}
