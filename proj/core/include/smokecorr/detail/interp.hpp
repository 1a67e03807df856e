#pragma once

#include <algorithm>
#include <cmath>

namespace smokecorr::detail {

/// Linear interpolation stencil along one axis with clamp-to-edge.
struct LerpStencil {
	int i0 = 0;
	int i1 = 0;
	double frac = 0.0;
	/// False when the coordinate was clamped; the sample is then locally
	/// constant along this axis.
	bool inside = true;
};

inline LerpStencil lerp_stencil(double p, int n) {
	LerpStencil s;
	if (n <= 1) {
		s.inside = false;
		return s;
	}
	const double hi = static_cast<double>(n - 1);
	if (!(p >= 0.0)) { // also catches NaN
		p = 0.0;
		s.inside = false;
	} else if (p > hi) {
		p = hi;
		s.inside = false;
	}
	int i0 = static_cast<int>(std::floor(p));
	i0 = std::min(i0, n - 2);
	s.i0 = i0;
	s.i1 = i0 + 1;
	s.frac = p - static_cast<double>(i0);
	return s;
}

} // namespace smokecorr::detail
