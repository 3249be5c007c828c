"""Hypothesis strategies for ASTs of the mini-language."""

from hypothesis import strategies as st

from splc.lang import Assign, BinOp, Break, Continue, If, Name, Neg, Num, Seq, Skip, While

NAMES = st.sampled_from(["a", "b", "c", "x", "y", "tmp_1"])

exprs = st.recursive(
    st.one_of(NAMES.map(Name), st.integers(0, 99).map(Num)),
    lambda sub: st.one_of(
        sub.map(Neg),
        st.tuples(st.sampled_from(["+", "-", "*", "/"]), sub, sub).map(lambda t: BinOp(*t)),
    ),
    max_leaves=6,
)

conditions = st.one_of(
    exprs,
    st.tuples(st.sampled_from(["==", "!=", "<", "<=", ">", ">="]), exprs, exprs)
    .map(lambda t: BinOp(*t)),
)

atoms = st.one_of(
    st.just(Skip()), st.just(Break()), st.just(Continue()),
    st.tuples(NAMES, exprs).map(lambda t: Assign(*t)),
)


def _compound(sub):
    # right operand of Seq is never a Seq: sequencing is left-associative
    non_seq = sub.filter(lambda s: not isinstance(s, Seq))
    return st.one_of(
        st.tuples(sub, non_seq).map(lambda t: Seq(*t)),
        st.tuples(conditions, sub, sub).map(lambda t: If(*t)),
        st.tuples(conditions, sub).map(lambda t: While(*t)),
    )


programs = st.recursive(atoms, _compound, max_leaves=12)
