//! Parses a parameter listing, applies an override and prints the resolved
//! explanation parameters.

use contrast_xai::config::RunConfig;

const LISTING: &str = "
max_predictors = 6
num_samples = 1000
apply_counterfactual_weights = True
counterfactual_weight = 200
binary_decision_boundary = 0.5
sufficiency_threshold = 0.99
image_infill ='GAN'
image_segment_type ='Thresholding'
max_segments_in_counterfactual =4
min_segs_created_for_Augmented_GAN = 4
image_classes =['healthy','diseased']
";

fn main() -> contrast_xai::Result<()> {
    let cfg = RunConfig::parse(LISTING)?.with_overrides(&["image_infill = black".into()])?;
    println!("{:#?}", cfg.explain_params((128, 128)));
    match RunConfig::parse("counterfactual_wieght = 200") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
