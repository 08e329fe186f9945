//! Drives a classifier living in a child process over the JSON-lines
//! protocol. The child is this same example started with `--child`.

use std::time::Duration;

use contrast_xai::classifier::{serve, Classifier, FnClassifier, SubprocessClassifier};
use contrast_xai::imaging::Image;

fn mean_brightness() -> FnClassifier<impl Fn(&Image) -> f64 + Send + Sync> {
    FnClassifier::new("mean brightness", |x: &Image| {
        x.pixels().iter().map(|&p| f64::from(p)).sum::<f64>() / x.pixels().len() as f64
    })
}

fn main() -> contrast_xai::Result<()> {
    if std::env::args().any(|a| a == "--child") {
        return serve(&mean_brightness(), std::io::stdin().lock(), std::io::stdout().lock());
    }
    let me = std::env::current_exe().expect("executable path");
    let child = SubprocessClassifier::spawn(
        me.to_string_lossy(),
        &["--child".to_string()],
        Duration::from_secs(10),
    )?;
    for v in [0.1f32, 0.5, 0.9] {
        let x = Image::filled(16, 16, v);
        println!("p(filled {v}) = {:.3}", child.probability(&x)?);
    }
    Ok(())
}
