"""Fixed numerical conventions shared by every module.

All index gymnastics in this package follow one set of choices.  They are
collected here (rather than scattered through docstrings) so that reports can
embed a hash of the active conventions and so cross-version comparisons of
serialized output are detectable.
"""

from __future__ import annotations

import hashlib
import json

#: Curvature sign convention.  R(X,Y)Z = nab_X nab_Y Z - nab_Y nab_X Z
#: - nab_[X,Y] Z, with components R^l_{ijk} defined by R(d_i,d_j)d_k =
#: R^l_{ijk} d_l, i.e.
#:
#:     R^l_{ijk} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
#:                 + Gamma^m_{jk} Gamma^l_{im} - Gamma^m_{ik} Gamma^l_{jm}.
#:
#: With this choice the unit round 2-sphere has R_{1221} = +1 (sectional
#: curvature) and R_{1212} = -1 in an orthonormal frame; Ricci R_{jk} =
#: R^i_{ijk} and scalar curvature are positive on the sphere as usual.  This
#: is the convention in which the quadratic Rm(U,U) = R_{ijkl} U^{ij} U^{lk}
#: (note the lk order) is non-negative for non-negative curvature operator.
CONVENTIONS = {
    "riemann_sign": "R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^m_jk G^l_im - G^m_ik G^l_jm",
    "riemann_array_order": "Rup[i,j,k,l] = R^l_{ijk}; Rlow[i,j,k,l] = R_{ijkl}",
    "lowering": "R_{ijkl} = g_{lm} R^m_{ijk} for l>=1; -g_{km} R^m_{ijl} for l=0,k>=1; 0 for k=l=0",
    "sphere_check": "unit round S^2: R_1221 = +1, R_1212 = -1, Rc = g, R = 2",
    "quadratic_index_order": "Rm(S,T) = sum R_{ijkl} S^{ij} T^{lk}",
    "hodge_sign": "Delta_d = -(d delta + delta d); equals the rough Laplacian on functions",
    "codifferential": "(delta A)_k = -nab^p A_{pk} on forms",
    "time_index": "space-time coordinate 0 is time; d_0 means d/dtbar when rescaled, d/dt otherwise",
    "lambda2_basis": "pairs (a,b), a<b, lexicographic over 0..n; spatial pairs ordered after the same rule",
    "two_form_norm": "|U|^2 = g_{ik} g_{jl} U^{ij} U^{kl}; |A|^2 = A_{ij} A^{ij} (full contraction)",
    "orthonormal_two_vector_basis": "(e_a ^ e_b)/sqrt(2), a<b, for eigenvalue extraction",
    "vee_action": "(L v T)_{c...} = sum over slots of L_slot^m T_{..m..} for a (1,1) coefficient L",
    "fd_default": "central differences, order 4; h = 1e-3 * domain scale, h_t = 1e-3 * interval scale",
    "deep_step_factor": 5.0,
    "config_format": "json",
}


def convention_hash() -> str:
    """Stable hash of the convention table, embedded in every report."""
    blob = json.dumps(CONVENTIONS, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


#: Factor by which the finite-difference step grows for each nesting level
#: beyond the first when differentiating an evaluator that is itself the
#: output of a finite difference.  Keeps subtractive cancellation below the
#: truncation error for the three-level compositions in the identity suite.
DEEP_STEP_FACTOR = CONVENTIONS["deep_step_factor"]
