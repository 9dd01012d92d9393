//! Named parameter groups and their tape counterparts.

/// Declares a struct of named parameter tensors together with a `Copy`
/// struct of tape handles holding the same fields.
macro_rules! param_struct {
    (
        $(#[$meta:meta])*
        pub struct $name:ident / $vars:ident {
            $($(#[$fmeta:meta])* $field:ident,)*
        }
    ) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            $($(#[$fmeta])* pub $field: $crate::tensor::Tensor,)*
        }

        #[derive(Clone, Copy, Debug)]
        pub struct $vars<'t> {
            $(pub $field: $crate::tensor::Var<'t>,)*
        }

        impl $name {
            pub const NAMES: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn tensors(&self) -> Vec<&$crate::tensor::Tensor> {
                vec![$(&self.$field),*]
            }

            pub fn named(&self) -> Vec<(&'static str, &$crate::tensor::Tensor)> {
                vec![$((stringify!($field), &self.$field)),*]
            }

            pub fn tensors_mut(&mut self) -> Vec<&mut $crate::tensor::Tensor> {
                vec![$(&mut self.$field),*]
            }

            /// Registers every tensor as a differentiable leaf.
            pub fn leaves<'t>(&self, tape: &'t $crate::tensor::Tape) -> $vars<'t> {
                $vars { $($field: tape.leaf(self.$field.clone()),)* }
            }

            /// Registers every tensor as a constant, for inference.
            pub fn constants<'t>(&self, tape: &'t $crate::tensor::Tape) -> $vars<'t> {
                $vars { $($field: tape.constant(self.$field.clone()),)* }
            }
        }

        impl<'t> $vars<'t> {
            pub fn all(&self) -> Vec<$crate::tensor::Var<'t>> {
                vec![$(self.$field),*]
            }

            /// Inverse of [`Self::all`]; `None` when the count is wrong.
            pub fn from_slice(vars: &[$crate::tensor::Var<'t>]) -> Option<Self> {
                let mut it = vars.iter().copied();
                let out = Self { $($field: it.next()?,)* };
                it.next().is_none().then_some(out)
            }
        }
    };
}

pub(crate) use param_struct;
