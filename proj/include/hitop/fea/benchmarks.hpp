#pragma once

#include "hitop/fea/problem.hpp"

namespace hitop::fea {

/// MBB half-beam: unit downward load at the top-left node, symmetry (x) on the
/// left edge, roller (y) at the bottom-right node.
DesignProblem mbb_beam(int nelx, int nely, double volfrac);

/// Square L-bracket of side n. The top-right cutout of side round(cutout * n)
/// is passive void; the top edge of the remaining leg is clamped and a unit
/// downward load acts on the upper right corner of the horizontal arm.
DesignProblem l_bracket(int n, double cutout_fraction, double volfrac);

/// Cantilever clamped on the left edge with a unit downward load at the middle
/// of the right edge.
DesignProblem cantilever(int nelx, int nely, double volfrac);

}  // namespace hitop::fea
