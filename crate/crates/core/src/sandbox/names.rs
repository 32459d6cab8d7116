//! Physical storage names. A logical table `t` of component `C` is stored
//! as `f_C__t`. Component and table names never contain `__` nor start or
//! end with `_`, so the first `__` after the `f_` prefix always separates
//! the two parts and the mapping is injective.

use crate::schema::valid_name;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhysicalName {
    pub component: String,
    pub logical: String,
    pub physical: String,
}

impl PhysicalName {
    pub fn new(component: &str, logical: &str) -> Self {
        Self { component: component.to_owned(), logical: logical.to_owned(), physical: physical_name(component, logical) }
    }
}

pub fn physical_name(component: &str, logical: &str) -> String {
    format!("f_{component}__{logical}")
}

/// Inverse of [`physical_name`] for names built from valid parts.
pub fn split_physical(physical: &str) -> Option<(&str, &str)> {
    let rest = physical.strip_prefix("f_")?;
    let (component, logical) = rest.split_once("__")?;
    (valid_name(component) && valid_name(logical)).then_some((component, logical))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    #[test]
    fn round_trip() {
        assert_eq!(physical_name("Groups", "groups"), "f_Groups__groups");
        assert_eq!(split_physical("f_Groups__groups"), Some(("Groups", "groups")));
        assert_eq!(split_physical("f_a_b__c_d"), Some(("a_b", "c_d")));
        assert_eq!(split_physical("groups"), None);
        assert_eq!(split_physical("f_a___b"), None);
    }

    proptest! {
        #[test]
        fn prefixing_is_injective(pairs in prop::collection::vec(("[A-Za-z0-9_]{1,6}", "[A-Za-z0-9_]{1,6}"), 1..40)) {
            let valid: Vec<(String, String)> = pairs.into_iter().filter(|(c, t)| valid_name(c) && valid_name(t)).collect();
            let mut seen: HashMap<String, (String, String)> = HashMap::new();
            for (c, t) in valid {
                let p = physical_name(&c, &t);
                prop_assert_eq!(split_physical(&p), Some((c.as_str(), t.as_str())));
                if let Some(prev) = seen.insert(p.clone(), (c.clone(), t.clone())) {
                    prop_assert_eq!(prev, (c, t));
                }
            }
        }

        #[test]
        fn adversarial_names_never_collide(a in "[a_]{1,5}", b in "[a_]{1,5}", c in "[a_]{1,5}", d in "[a_]{1,5}") {
            if valid_name(&a) && valid_name(&b) && valid_name(&c) && valid_name(&d) && (a != c || b != d) {
                prop_assert_ne!(physical_name(&a, &b), physical_name(&c, &d));
            }
        }
    }
}
