use crate::datatypes::{self, DocState, MaterializeError, MaterializedValue, RegisterMode};
use crate::id::OpId;
use crate::opset::OpSet;
use crate::tree;

/// Which interpretation of `Assign` to use when reading an OpSet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Semantics {
    #[default]
    MultiValue,
    LastWriterWins,
    Tree,
}

impl Semantics {
    pub fn interpret(&self, ops: &OpSet) -> DocState {
        match self {
            Semantics::MultiValue => datatypes::interpret(ops, RegisterMode::MultiValue),
            Semantics::LastWriterWins => datatypes::interpret(ops, RegisterMode::LastWriterWins),
            Semantics::Tree => tree::interpret_tree(ops),
        }
    }

    pub fn materialize(
        &self,
        ops: &OpSet,
        root: &OpId,
    ) -> Result<MaterializedValue, MaterializeError> {
        datatypes::materialize(&self.interpret(ops), root, ops)
    }
}
