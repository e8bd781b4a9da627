use sotpim::arith::*; use sotpim::workload::*; use sotpim::Result;
struct Cmp { p: PimArith, l: FloatLayout, n: u64 }
impl FloatArith for Cmp {
    fn layout(&self) -> FloatLayout { self.l }
    fn add(&mut self, a: &FloatBits, b: &FloatBits) -> Result<(FloatBits, FpFlags)> {
        self.n += 1;
        let x = self.p.add(a, b)?; let y = ref_add(&self.l, a, b);
        if x != y { panic!("add #{} {a:?} + {b:?}: pim {x:?} ref {y:?}", self.n); }
        Ok(y)
    }
    fn mul(&mut self, a: &FloatBits, b: &FloatBits) -> Result<(FloatBits, FpFlags)> {
        self.n += 1;
        let x = self.p.mul(a, b)?; let y = ref_mul(&self.l, a, b);
        if x != y { panic!("mul #{} {a:?} * {b:?}: pim {x:?} ref {y:?}", self.n); }
        Ok(y)
    }
}
fn main() {
    let net = NetworkSpec::preset("xor-mlp").unwrap();
    let mut c = Cmp { p: PimArith::new(FloatLayout::FP32).unwrap(), l: FloatLayout::FP32, n: 0 };
    functional_train_tiny(&mut c, &net, &TinyConfig::default()).unwrap();
}
