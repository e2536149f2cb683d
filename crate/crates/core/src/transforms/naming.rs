use std::collections::BTreeSet;

use crate::expr::VarId;

/// Hands out variable names that are unused in a given scope.
///
/// An original variable first tries its rotation partner (x, y, z to a, b, c
/// and a, b, c to u, v, w) and otherwise takes the smallest free index on
/// its own base. Indexed variables continue on their base.
#[derive(Debug, Clone, Default)]
pub struct FreshNamer {
    used: BTreeSet<VarId>,
}

fn rotation(base: &str) -> Option<&'static str> {
    Some(match base {
        "x" => "a",
        "y" => "b",
        "z" => "c",
        "a" => "u",
        "b" => "v",
        "c" => "w",
        _ => return None,
    })
}

impl FreshNamer {
    pub fn new<I: IntoIterator<Item = VarId>>(used: I) -> Self {
        Self {
            used: used.into_iter().collect(),
        }
    }

    pub fn reserve(&mut self, v: VarId) {
        self.used.insert(v);
    }

    pub fn is_used(&self, v: &VarId) -> bool {
        self.used.contains(v)
    }

    /// A fresh variable derived from `v`, reserved before returning.
    pub fn fresh_for(&mut self, v: &VarId) -> VarId {
        if v.idx() == 0 {
            if let Some(partner) = rotation(v.base()) {
                let cand = VarId::named(partner);
                if !self.used.contains(&cand) {
                    self.used.insert(cand.clone());
                    return cand;
                }
            }
        }
        let start = v.idx().max(1);
        let mut k = start;
        loop {
            let cand = VarId::new(v.base(), k);
            if !self.used.contains(&cand) {
                self.used.insert(cand.clone());
                return cand;
            }
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_then_index() {
        let mut n = FreshNamer::new([VarId::named("x"), VarId::named("y"), VarId::named("a")]);
        assert_eq!(n.fresh_for(&VarId::named("y")), VarId::named("b"));
        assert_eq!(n.fresh_for(&VarId::named("x")), VarId::new("x", 1));
        assert_eq!(n.fresh_for(&VarId::named("a")), VarId::named("u"));
        assert_eq!(n.fresh_for(&VarId::named("q")), VarId::new("q", 1));
    }

    #[test]
    fn indexed_variables_continue_on_base() {
        let mut n = FreshNamer::new((1..=4).map(|i| VarId::new("x", i)));
        assert_eq!(n.fresh_for(&VarId::new("x", 4)), VarId::new("x", 5));
        assert_eq!(n.fresh_for(&VarId::new("x", 1)), VarId::new("x", 6));
    }
}
