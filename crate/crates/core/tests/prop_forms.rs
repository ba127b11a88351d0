use num_bigint::BigInt;
use num_traits::One;
use proptest::prelude::*;
use squfof_core::infra::{self, DistanceFormulaInput};
use squfof_core::qforms::{self, Discriminant, Matrix, QuadForm};
use squfof_core::selftest::valid_discriminants;

fn disc() -> impl Strategy<Value = i64> {
    let all = valid_discriminants(20_000);
    (0..all.len()).prop_map(move |i| all[i])
}

fn primitive_forms(d: i64) -> (std::sync::Arc<Discriminant>, Vec<QuadForm>) {
    let disc = Discriminant::new(BigInt::from(d)).unwrap();
    let forms = qforms::all_reduced_forms(&disc).into_iter().filter(QuadForm::is_primitive).collect();
    (disc, forms)
}

fn sl2(words: &[i64]) -> Matrix {
    let mut m = qforms::identity_matrix();
    for &k in words {
        let t = [[BigInt::one(), BigInt::from(k)], [BigInt::from(0), BigInt::one()]];
        let w = [[BigInt::from(0), -BigInt::one()], [BigInt::one(), BigInt::from(0)]];
        m = qforms::mat_mul(&qforms::mat_mul(&m, &t), &w);
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduction_is_a_proper_equivalence(d in disc(), pick in any::<prop::sample::Index>(), words in prop::collection::vec(-50i64..50, 1..8)) {
        let (_, forms) = primitive_forms(d);
        let f = &forms[pick.index(forms.len())];
        let g = f.act(&sl2(&words));
        let red = g.reduce().unwrap();
        prop_assert!(red.form.is_reduced());
        prop_assert_eq!(qforms::mat_det(&red.matrix()), BigInt::one());
        prop_assert_eq!(g.act(&red.matrix()), red.form.clone());
        let cyc = f.cycle(forms.len() + 1).unwrap();
        prop_assert!(cyc.contains(&red.form));
    }

    #[test]
    fn rho_inverse_undoes_rho(d in disc(), pick in any::<prop::sample::Index>()) {
        let (_, forms) = primitive_forms(d);
        let f = &forms[pick.index(forms.len())];
        prop_assert_eq!(f.rho().unwrap().rho_inv().unwrap(), f.clone());
        prop_assert_eq!(f.rho_inv().unwrap().rho().unwrap(), f.clone());
    }

    #[test]
    fn composition_is_a_group_law_on_cycles(d in disc(), i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>(), k in any::<prop::sample::Index>()) {
        let (disc, forms) = primitive_forms(d);
        let (f, g, h) = (&forms[i.index(forms.len())], &forms[j.index(forms.len())], &forms[k.index(forms.len())]);
        let c = |x: &QuadForm, y: &QuadForm| x.compose_reduce(y).unwrap().form;
        let fg = c(f, g);
        prop_assert_eq!(&fg.b * &fg.b - BigInt::from(4) * &fg.a * &fg.c, BigInt::from(d));
        let cyc = |x: &QuadForm| x.cycle(forms.len() + 1).unwrap();
        prop_assert!(cyc(&fg).contains(&c(g, f)));
        prop_assert!(cyc(&c(&fg, h)).contains(&c(f, &c(g, h))));
        prop_assert!(cyc(f).contains(&c(f, &QuadForm::principal(&disc))));
        // f # f⁻¹ is principal
        let inv = f.inverse().reduce().unwrap().form;
        prop_assert!(cyc(&QuadForm::principal(&disc)).contains(&c(f, &inv)));
    }

    #[test]
    fn distance_formula(d in disc(), picks in prop::array::uniform6(any::<prop::sample::Index>())) {
        let (disc, forms) = primitive_forms(d);
        let r = QuadForm::principal(&disc).projective_cycle_distance(1 << 20).unwrap();
        let f = forms[picks[0].index(forms.len())].projective_cycle(1 << 20).unwrap();
        let g = forms[picks[1].index(forms.len())].projective_cycle(1 << 20).unwrap();
        let walk = |c: &[QuadForm], a: usize, k: usize| (0..k).map(|t| c[(a + t) % c.len()].rho_distance()).sum::<f64>();
        let (a, k) = (picks[2].index(f.len()), picks[3].index(f.len()));
        let (b, l) = (picks[4].index(g.len()), picks[5].index(g.len()));
        let inst = DistanceFormulaInput {
            f1: f[a].clone(),
            fk: f[(a + k) % f.len()].clone(),
            g1: g[b].clone(),
            gl: g[(b + l) % g.len()].clone(),
            d_f: walk(&f, a, k),
            d_g: walk(&g, b, l),
            regulator: r,
        };
        let res = infra::check_distance_formula(&inst, 1 << 20).unwrap();
        prop_assert!(res <= 1e-9 * r, "residual {res} with R = {r}");
    }

    #[test]
    fn cycle_distance_is_start_independent(d in disc(), pick in any::<prop::sample::Index>()) {
        let (disc, forms) = primitive_forms(d);
        let r = QuadForm::principal(&disc).projective_cycle_distance(1 << 20).unwrap();
        let f = &forms[pick.index(forms.len())];
        let rf = f.projective_cycle_distance(1 << 20).unwrap();
        prop_assert!((rf - r).abs() <= 1e-9 * r);
    }

    #[test]
    fn symmetry_centres_half_a_cycle_apart(d in disc()) {
        let disc = Discriminant::new(BigInt::from(d)).unwrap();
        let (c, r) = infra::symmetry_centers(&QuadForm::principal(&disc), 1 << 20).unwrap();
        prop_assert_eq!(c.len(), 2);
        prop_assert!(((c[1].center - c[0].center) - r / 2.0).abs() <= 1e-9 * r);
    }
}
