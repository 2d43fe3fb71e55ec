//! Every example runs to completion.

macro_rules! example {
    ($name:ident, $file:literal) => {
        mod $name {
            #![allow(dead_code)]
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));

            #[test]
            fn runs() {
                run_example().unwrap();
            }
        }
    };
}

example!(quickstart, "quickstart.rs");
example!(grounding_vector, "grounding_vector.rs");
example!(risk_pipeline, "risk_pipeline.rs");
example!(attention_intervention, "attention_intervention.rs");
example!(kv_cache, "kv_cache.rs");
example!(sampling, "sampling.rs");
example!(dual_effect, "dual_effect.rs");
example!(risk_ordering, "risk_ordering.rs");
example!(weight_snapshot, "weight_snapshot.rs");
example!(trace_export, "trace_export.rs");
example!(sensitivity_sweep, "sensitivity_sweep.rs");
example!(overhead, "overhead.rs");
example!(custom_modulator, "custom_modulator.rs");
