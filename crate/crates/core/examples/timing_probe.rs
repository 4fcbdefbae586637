use gapfill_core::data_model::*;
use gapfill_core::ga::GaConfig;
use gapfill_core::hotdeck::HotDeckConfig;
use gapfill_core::imputer::*;
use gapfill_core::mlp::TrainConfig;

fn main() {
    let schema = default_schema();
    let table = synthesize(&schema, 2000, 8, &default_synth_spec()).unwrap();
    let matrix = encode(&table).unwrap();
    let ds = split(&matrix, 3).unwrap();
    let masked = inject_missing(&ds.test, &MissingnessMechanism::Mcar { rate: 0.5 }, &["age".into()], 12).unwrap();
    let cfg = ModelTrainingConfig { mlp: TrainConfig { epochs: 40, ..Default::default() }, ..Default::default() };
    let models = ModelSet::train_for(Method::new(MethodKind::NnGa, false), &ds.train, &cfg).unwrap();
    let ga = GaConfig::default();
    for rep in 0..6 {
        let t0 = std::time::Instant::now();
        let p = impute_table(&masked, Method::new(MethodKind::NnGa, false), &models, &ga, &HotDeckConfig::default(), None, 1);
        let plain_ms = t0.elapsed().as_secs_f64()*1e3;
        let t1 = std::time::Instant::now();
        let h = impute_table(&masked, Method::new(MethodKind::NnGa, true), &models, &ga, &HotDeckConfig::default(), Some(&ds.train), 1);
        let hybrid_ms = t1.elapsed().as_secs_f64()*1e3;
        println!("rep {rep}: plain {plain_ms:.1} ms ({} rows), hybrid {hybrid_ms:.1} ms ({} rows), ratio {:.3}",
            p.records.len(), h.records.len(), hybrid_ms/plain_ms);
    }
}
