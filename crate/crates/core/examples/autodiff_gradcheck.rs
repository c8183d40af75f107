//! Fits a small two-layer regression with the tape and Adam, then checks
//! its gradients against finite differences.

use encore::tensor::adam::AdamState;
use encore::tensor::gradcheck::check_gradients;
use encore::tensor::{ParamStore, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn loss(tape: &mut Tape, store: &ParamStore, x: &Tensor, y: &Tensor) -> encore::Result<Var> {
    let w1 = tape.param(store, store.id("w1").unwrap());
    let w2 = tape.param(store, store.id("w2").unwrap());
    let x = tape.constant(x.clone());
    let y = tape.constant(y.clone());
    let h = tape.matmul(x, w1)?;
    let h = tape.tanh(h)?;
    let p = tape.matmul(h, w2)?;
    let d = tape.sub(p, y)?;
    let d = tape.square(d)?;
    tape.mean_all(d)
}

fn main() -> encore::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::uniform(&[64, 3], 1.0, &mut rng);
    let y = Tensor::from_fn(&[64, 1], |i| {
        let r = &x.data()[i * 3..i * 3 + 3];
        (r[0] - 2.0 * r[1]).sin() + 0.5 * r[2]
    });

    let mut store = ParamStore::new();
    store.add("w1", Tensor::uniform(&[3, 16], 0.5, &mut rng))?;
    store.add("w2", Tensor::uniform(&[16, 1], 0.5, &mut rng))?;

    let mut adam = AdamState::new(1e-2);
    for step in 0..=600 {
        store.zero_grad();
        let mut tape = Tape::new();
        let l = loss(&mut tape, &store, &x, &y)?;
        tape.backward_into(l, &mut store)?;
        if step % 150 == 0 {
            println!("step {step:>3}  mse {:.5}", tape.value(l).item());
        }
        adam.step(&mut store)?;
    }

    let report = check_gradients(&mut store, |tape, s| loss(tape, s, &x, &y), 1e-6)?;
    println!(
        "gradient check over {} entries: max abs {:.2e}, max rel {:.2e}",
        report.checked, report.max_abs_error, report.max_rel_error
    );
    Ok(())
}
