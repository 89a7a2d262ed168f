"""
Bundled example programs.

`BSP_SOURCE` is a four-command program over two boolean variables whose DTMC has seven reachable
states, one of them a deadlock at location 0 with `x=0` and `y=0`. `BSP_RVO_SOURCE` and
`BSP_RAO_SOURCE` are hand-reduced versions of it: resets of dead variables to their initial
values, and the merge of `x` and `y` into a single variable `xy`.
"""

from pcfp.frontend import parse
from pcfp.program import Program

BSP_SOURCE = """\
dtmc

module bsp
	cf : [0..3] init 0;
	x : [0..1] init 1;
	y : [0..1] init 1;

	[] cf=0 & x=1 -> 1:(cf'=1)&(x'=0);
	[] cf=1 & x=0 -> 0.5:(cf'=2)&(y'=0) + 0.5:(cf'=3)&(y'=0);
	[] cf=2 -> 1:(cf'=0)&(x'=1);
	[] cf=3 -> 0.3:(cf'=0)&(x'=0) + 0.7:(cf'=1)&(x'=0);
endmodule
"""

BSP_RVO_SOURCE = """\
dtmc

module bsp
	cf : [0..3] init 0;
	x : [0..1] init 1;
	y : [0..1] init 1;

	[] cf=0 & x=1 -> 1:(cf'=1)&(x'=0);
	[] cf=1 & x=0 -> 0.5:(cf'=2)&(x'=1)&(y'=0) + 0.5:(cf'=3)&(x'=1)&(y'=0);
	[] cf=2 -> 1:(cf'=0)&(x'=1)&(y'=1);
	[] cf=3 -> 0.3:(cf'=0)&(x'=0) + 0.7:(cf'=1)&(x'=0);
endmodule
"""

BSP_RAO_SOURCE = """\
dtmc

module bsp
	cf : [0..3] init 0;
	xy : [0..1] init 1;

	[] cf=0 & xy=1 -> 1:(cf'=1)&(xy'=0);
	[] cf=1 & xy=0 -> 0.5:(cf'=2)&(xy'=0) + 0.5:(cf'=3)&(xy'=0);
	[] cf=2 -> 1:(cf'=0)&(xy'=1);
	[] cf=3 -> 0.3:(cf'=0)&(xy'=0) + 0.7:(cf'=1)&(xy'=0);
endmodule
"""

FAIL_LABEL = "fail"

BSP_FAIL = "cf=0 & x=0"
"""Reaching the deadlock state of `BSP_SOURCE`."""

BSP_LABELLED_SOURCE = BSP_SOURCE + f'\nlabel "{FAIL_LABEL}" = {BSP_FAIL};\n'


def bsp() -> Program:
    return parse(BSP_SOURCE)


def bsp_labelled() -> Program:
    """`bsp()` with the label `"fail"` on the deadlock state."""
    return parse(BSP_LABELLED_SOURCE)


EXAMPLES: dict[str, str] = {
    "bsp": BSP_SOURCE,
    "bsp-rvo": BSP_RVO_SOURCE,
    "bsp-rao": BSP_RAO_SOURCE,
    "bsp-labelled": BSP_LABELLED_SOURCE,
}
"""Example sources by name."""
