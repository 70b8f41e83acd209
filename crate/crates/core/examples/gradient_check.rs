//! Records a small expression on the autodiff tape, compares its reverse-mode
//! gradient with central finite differences, then takes a few Adam steps.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use caugnn::autodiff::{AdamConfig, AdamState, Parameters, Tape, Tensor, Var};

/// `mean(|relu(conv1d(x, k)) W - 1|)` for a length-6 signal, a width-3
/// kernel and a 4 x 2 weight matrix.
fn expression(tape: &mut Tape, x: Var, k: Var, w: Var) -> caugnn::Result<Var> {
    let h = tape.conv1d(x, k, None)?;
    let h = tape.relu(h);
    let h = tape.reshape(h, &[1, 4])?;
    let y = tape.matmul(h, w)?;
    let one = tape.scalar(1.0);
    let d = tape.sub(y, one)?;
    let d = tape.abs(d);
    tape.mean(d)
}

fn value(x: &Tensor, k: &Tensor, w: &Tensor) -> caugnn::Result<f64> {
    let mut tape = Tape::new();
    let (xv, kv, wv) = (tape.leaf(x), tape.leaf(k), tape.leaf(w));
    let l = expression(&mut tape, xv, kv, wv)?;
    Ok(tape.value(l)[0])
}

fn main() -> anyhow::Result<()> {
    let x = Tensor::new(vec![6], vec![0.3, -1.2, 0.8, 1.5, -0.4, 0.9])?;
    let k = Tensor::new(vec![3], vec![0.5, -0.25, 0.75])?.requiring_grad();
    let w = Tensor::matrix(4, 2, vec![0.1, -0.3, 0.7, 0.2, -0.5, 0.4, 0.9, -0.6])?.requiring_grad();

    let mut tape = Tape::new();
    let (xv, kv, wv) = (tape.leaf(&x), tape.leaf(&k), tape.leaf(&w));
    let l = expression(&mut tape, xv, kv, wv)?;
    let grads = tape.backward(l)?;
    let analytic = grads.get(kv).expect("kernel requires grad");

    let h = 1e-5;
    println!("loss {:.6}", tape.value(l)[0]);
    println!("{:>4}{:>14}{:>14}", "k[i]", "analytic", "numeric");
    for (i, a) in analytic.iter().enumerate() {
        let (mut up, mut down) = (k.clone(), k.clone());
        up.data_mut()[i] += h;
        down.data_mut()[i] -= h;
        let numeric = (value(&x, &up, &w)? - value(&x, &down, &w)?) / (2.0 * h);
        println!("{i:>4}{a:>14.8}{numeric:>14.8}");
    }

    let mut params = Parameters::new();
    let kid = params.insert("kernel", k);
    let wid = params.insert("weights", w);
    let mut adam = AdamState::new(
        &params,
        AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        },
    );
    for step in 0..=40 {
        let mut tape = Tape::new();
        let xv = tape.leaf(&x);
        let (kv, wv) = (tape.param(&params, kid), tape.param(&params, wid));
        let l = expression(&mut tape, xv, kv, wv)?;
        if step % 10 == 0 {
            println!("adam step {step:>2}: loss {:.6}", tape.value(l)[0]);
        }
        params.zero_grad();
        tape.backward_into(l, &mut params)?;
        adam.step(&mut params)?;
    }
    Ok(())
}
