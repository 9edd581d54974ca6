use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use statman_core::curvature::{identity_suite, riemann, ProjectivePack, DEFAULT_ALPHAS};
use statman_core::diagnostics::identity_table;
use statman_core::{builtin_chart, sample_points, ConnectionKind, FisherSource, GammaChart, ModelSpec, Point};

fn local_geometry(c: &mut Criterion) {
    let gamma = builtin_chart(&ModelSpec::gamma_fisher(
        GammaChart::ShapeRate,
        FisherSource::ClosedForm,
    ))
    .unwrap();
    let quadrature = builtin_chart(&ModelSpec::gamma_fisher(
        GammaChart::ShapeRate,
        FisherSource::Quadrature,
    ))
    .unwrap();
    let p = Point::new(vec![2.5, 1.5]).unwrap();

    c.bench_function("local/closed_form_gamma", |b| {
        b.iter(|| gamma.local(black_box(&p)).unwrap())
    });
    // Shift the point each iteration so the quadrature memo never hits.
    let mut shift = 0.0;
    c.bench_function("local/quadrature_gamma", |b| {
        b.iter(|| {
            shift += 1e-9;
            let q = Point::new(vec![2.5 + shift, 1.5]).unwrap();
            quadrature.local(black_box(&q)).unwrap()
        })
    });
}

fn curvature(c: &mut Criterion) {
    let chart = builtin_chart(&ModelSpec::gamma_fisher(
        GammaChart::ShapeRate,
        FisherSource::ClosedForm,
    ))
    .unwrap();
    let geo = chart.local(&Point::new(vec![2.5, 1.5]).unwrap()).unwrap();
    let conn = geo.connection(ConnectionKind::Nabla);

    c.bench_function("riemann", |b| b.iter(|| riemann(black_box(&conn))));
    c.bench_function("projective_pack", |b| {
        b.iter(|| ProjectivePack::new(black_box(&conn)).unwrap())
    });
    c.bench_function("identity_suite/point", |b| {
        b.iter(|| identity_suite(black_box(&geo), &DEFAULT_ALPHAS, 1e-8).unwrap())
    });
}

fn identity_tables(c: &mut Criterion) {
    let mut group = c.benchmark_group("identity_table");
    group.sample_size(10);
    for spec in [ModelSpec::euclidean(3), ModelSpec::normal_fisher()] {
        let chart = builtin_chart(&spec).unwrap();
        let points = sample_points(chart.domain(), 20, 0).unwrap();
        group.bench_function(chart.label().to_string(), |b| {
            b.iter(|| identity_table(&chart, black_box(&points), &DEFAULT_ALPHAS, 1e-8).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, local_geometry, curvature, identity_tables);
criterion_main!(benches);
