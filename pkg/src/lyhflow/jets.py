"""Pointwise curvature algebra from metric jets.

Everything here is exact linear algebra on the derivative jet of the metric
at one point: Christoffel symbols and their derivatives, the Riemann tensor
(convention of :mod:`lyhflow.conventions`: ``Rup[i,j,k,l] = R^l_{ijk}``),
Ricci, scalar curvature, and their first and second covariant derivatives.
When the metric family carries analytic derivative access these values are
exact to roundoff, which is what makes the deeper finite-difference
identities in the space-time module well conditioned.
"""

from __future__ import annotations

import numpy as np


def _sym_term(dg):
    # S[l,i,j] = d_i g_jl + d_j g_il - d_l g_ij
    return np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg


class GeometryJet:
    """Curvature data of one metric family at one (x, t), computed lazily.

    ``order`` is the highest spatial metric derivative that will be
    requested; 2 suffices for curvature, 3 adds nabla Rm / nabla Rc, 4 adds
    second covariant derivatives (Delta Rc, nabla nabla R).
    """

    def __init__(self, metric, x, t, order=2):
        self.metric = metric
        self.x = np.asarray(x, dtype=float)
        self.t = float(t)
        self.order = order
        self.n = metric.dimension
        jet = metric.jet(self.x, self.t, order)
        self.g = jet[0]
        self.dg = jet[1] if order >= 1 else None
        self.ddg = jet[2] if order >= 2 else None
        self.dddg = jet[3] if order >= 3 else None
        self.d4g = jet[4] if order >= 4 else None
        self._cache = {}

    def _get(self, name, builder):
        if name not in self._cache:
            self._cache[name] = builder()
        return self._cache[name]

    # -- metric inverse chain ------------------------------------------------

    @property
    def ginv(self):
        return self._get("ginv", lambda: np.linalg.inv(self.g))

    @property
    def dginv(self):
        def build():
            return -np.einsum("ip,apq,qj->aij", self.ginv, self.dg, self.ginv)

        return self._get("dginv", build)

    @property
    def ddginv(self):
        def build():
            G, dG, dg, ddg = self.ginv, self.dginv, self.dg, self.ddg
            return -(
                np.einsum("bip,apq,qj->abij", dG, dg, G)
                + np.einsum("ip,abpq,qj->abij", G, ddg, G)
                + np.einsum("ip,apq,bqj->abij", G, dg, dG)
            )

        return self._get("ddginv", build)

    @property
    def dddginv(self):
        def build():
            G, dG, ddG = self.ginv, self.dginv, self.ddginv
            dg, ddg, dddg = self.dg, self.ddg, self.dddg
            return -(
                np.einsum("bcip,apq,qj->abcij", ddG, dg, G)
                + np.einsum("bip,acpq,qj->abcij", dG, ddg, G)
                + np.einsum("bip,apq,cqj->abcij", dG, dg, dG)
                + np.einsum("cip,abpq,qj->abcij", dG, ddg, G)
                + np.einsum("ip,abcpq,qj->abcij", G, dddg, G)
                + np.einsum("ip,abpq,cqj->abcij", G, ddg, dG)
                + np.einsum("cip,apq,bqj->abcij", dG, dg, dG)
                + np.einsum("ip,acpq,bqj->abcij", G, ddg, dG)
                + np.einsum("ip,apq,bcqj->abcij", G, dg, ddG)
            )

        return self._get("dddginv", build)

    # -- Christoffel chain -----------------------------------------------------

    @property
    def gamma(self):
        # gamma[k,i,j] = Gamma^k_ij
        def build():
            return 0.5 * np.einsum("kl,lij->kij", self.ginv, _sym_term(self.dg))

        return self._get("gamma", build)

    @property
    def dgamma(self):
        def build():
            S = _sym_term(self.dg)
            dS = np.einsum("aijl->alij", self.ddg) + np.einsum("ajil->alij", self.ddg) - self.ddg
            return 0.5 * (
                np.einsum("akl,lij->akij", self.dginv, S)
                + np.einsum("kl,alij->akij", self.ginv, dS)
            )

        return self._get("dgamma", build)

    def _dS(self):
        return np.einsum("aijl->alij", self.ddg) + np.einsum("ajil->alij", self.ddg) - self.ddg

    def _ddS(self):
        d3 = self.dddg
        return np.einsum("abijl->ablij", d3) + np.einsum("abjil->ablij", d3) - d3

    def _dddS(self):
        d4 = self.d4g
        return np.einsum("abcijl->abclij", d4) + np.einsum("abcjil->abclij", d4) - d4

    @property
    def ddgamma(self):
        def build():
            S, dS, ddS = _sym_term(self.dg), self._dS(), self._ddS()
            return 0.5 * (
                np.einsum("abkl,lij->abkij", self.ddginv, S)
                + np.einsum("akl,blij->abkij", self.dginv, dS)
                + np.einsum("bkl,alij->abkij", self.dginv, dS)
                + np.einsum("kl,ablij->abkij", self.ginv, ddS)
            )

        return self._get("ddgamma", build)

    @property
    def dddgamma(self):
        def build():
            S, dS, ddS, dddS = _sym_term(self.dg), self._dS(), self._ddS(), self._dddS()
            G, dG, ddG, dddG = self.ginv, self.dginv, self.ddginv, self.dddginv
            return 0.5 * (
                np.einsum("abckl,lij->abckij", dddG, S)
                + np.einsum("abkl,clij->abckij", ddG, dS)
                + np.einsum("ackl,blij->abckij", ddG, dS)
                + np.einsum("bckl,alij->abckij", ddG, dS)
                + np.einsum("akl,bclij->abckij", dG, ddS)
                + np.einsum("bkl,aclij->abckij", dG, ddS)
                + np.einsum("ckl,ablij->abckij", dG, ddS)
                + np.einsum("kl,abclij->abckij", G, dddS)
            )

        return self._get("dddgamma", build)

    # -- curvature --------------------------------------------------------------

    @property
    def riemann_up(self):
        # Rup[i,j,k,l] = R^l_{ijk}
        def build():
            dG, G = self.dgamma, self.gamma
            return (
                np.einsum("iljk->ijkl", dG)
                - np.einsum("jlik->ijkl", dG)
                + np.einsum("mjk,lim->ijkl", G, G)
                - np.einsum("mik,ljm->ijkl", G, G)
            )

        return self._get("riemann_up", build)

    @property
    def driemann_up(self):
        def build():
            dG, ddG, G = self.dgamma, self.ddgamma, self.gamma
            return (
                np.einsum("ailjk->aijkl", ddG)
                - np.einsum("ajlik->aijkl", ddG)
                + np.einsum("amjk,lim->aijkl", dG, G)
                + np.einsum("mjk,alim->aijkl", G, dG)
                - np.einsum("amik,ljm->aijkl", dG, G)
                - np.einsum("mik,aljm->aijkl", G, dG)
            )

        return self._get("driemann_up", build)

    @property
    def ddriemann_up(self):
        def build():
            G, dG, ddG, dddG = self.gamma, self.dgamma, self.ddgamma, self.dddgamma
            return (
                np.einsum("abiljk->abijkl", dddG)
                - np.einsum("abjlik->abijkl", dddG)
                + np.einsum("abmjk,lim->abijkl", ddG, G)
                + np.einsum("amjk,blim->abijkl", dG, dG)
                + np.einsum("bmjk,alim->abijkl", dG, dG)
                + np.einsum("mjk,ablim->abijkl", G, ddG)
                - np.einsum("abmik,ljm->abijkl", ddG, G)
                - np.einsum("amik,bljm->abijkl", dG, dG)
                - np.einsum("bmik,aljm->abijkl", dG, dG)
                - np.einsum("mik,abljm->abijkl", G, ddG)
            )

        return self._get("ddriemann_up", build)

    @property
    def riemann_low(self):
        def build():
            return np.einsum("ijkm,ml->ijkl", self.riemann_up, self.g)

        return self._get("riemann_low", build)

    @property
    def ricci(self):
        def build():
            return np.einsum("ijki->jk", self.riemann_up)

        return self._get("ricci", build)

    @property
    def dricci(self):
        def build():
            return np.einsum("aijki->ajk", self.driemann_up)

        return self._get("dricci", build)

    @property
    def ddricci(self):
        def build():
            return np.einsum("abijki->abjk", self.ddriemann_up)

        return self._get("ddricci", build)

    @property
    def ricci_mixed(self):
        # Rc[i]^j = R_i^j
        def build():
            return np.einsum("ip,pj->ij", self.ricci, self.ginv)

        return self._get("ricci_mixed", build)

    @property
    def scalar(self):
        def build():
            return float(np.einsum("jk,jk->", self.ginv, self.ricci))

        return self._get("scalar", build)

    @property
    def dscalar(self):
        def build():
            return np.einsum("ajk,jk->a", self.dginv, self.ricci) + np.einsum(
                "jk,ajk->a", self.ginv, self.dricci
            )

        return self._get("dscalar", build)

    @property
    def ddscalar(self):
        def build():
            return (
                np.einsum("abjk,jk->ab", self.ddginv, self.ricci)
                + np.einsum("ajk,bjk->ab", self.dginv, self.dricci)
                + np.einsum("bjk,ajk->ab", self.dginv, self.dricci)
                + np.einsum("jk,abjk->ab", self.ginv, self.ddricci)
            )

        return self._get("ddscalar", build)

    # -- covariant derivatives ---------------------------------------------------

    @property
    def nabla_ricci(self):
        # nabla_a R_ij
        def build():
            G = self.gamma
            return (
                self.dricci
                - np.einsum("mai,mj->aij", G, self.ricci)
                - np.einsum("maj,im->aij", G, self.ricci)
            )

        return self._get("nabla_ricci", build)

    @property
    def nabla_nabla_ricci(self):
        # nabla_b nabla_a R_ij
        def build():
            G, dG = self.gamma, self.dgamma
            dnab = (
                self.ddricci
                - np.einsum("bmai,mj->baij", dG, self.ricci)
                - np.einsum("mai,bmj->baij", G, self.dricci)
                - np.einsum("bmaj,im->baij", dG, self.ricci)
                - np.einsum("maj,bim->baij", G, self.dricci)
            )
            nab = self.nabla_ricci
            return (
                dnab
                - np.einsum("mba,mij->baij", G, nab)
                - np.einsum("mbi,amj->baij", G, nab)
                - np.einsum("mbj,aim->baij", G, nab)
            )

        return self._get("nabla_nabla_ricci", build)

    @property
    def laplacian_ricci(self):
        def build():
            return np.einsum("ba,baij->ij", self.ginv, self.nabla_nabla_ricci)

        return self._get("laplacian_ricci", build)

    @property
    def nabla_scalar(self):
        return self.dscalar

    @property
    def hessian_scalar(self):
        # nabla_a nabla_b R
        def build():
            return self.ddscalar - np.einsum("mab,m->ab", self.gamma, self.dscalar)

        return self._get("hessian_scalar", build)

    @property
    def nabla_riemann_up(self):
        # nabla_a R^l_{ijk}
        def build():
            G = self.gamma
            Rm = self.riemann_up
            return (
                self.driemann_up
                + np.einsum("lam,ijkm->aijkl", G, Rm)
                - np.einsum("mai,mjkl->aijkl", G, Rm)
                - np.einsum("maj,imkl->aijkl", G, Rm)
                - np.einsum("mak,ijml->aijkl", G, Rm)
            )

        return self._get("nabla_riemann_up", build)

    @property
    def p_tensor(self):
        # P_ijk = nabla_i R_jk - nabla_j R_ik
        def build():
            nab = self.nabla_ricci
            return nab - np.einsum("jik->ijk", nab)

        return self._get("p_tensor", build)

    @property
    def nabla_p(self):
        # nabla_a P_ijk
        def build():
            nn = self.nabla_nabla_ricci
            return nn - np.einsum("ajik->aijk", nn)

        return self._get("nabla_p", build)


# ---------------------------------------------------------------------------
# small frame / index helpers


def orthonormal_frame(g):
    """Columns e[:, a] of an orthonormal frame: e^T g e = identity."""
    L = np.linalg.cholesky(g)
    return np.linalg.inv(L).T


def raise_first(T, ginv):
    """Raise the first index of a covariant tensor."""
    return np.tensordot(ginv, T, axes=(1, 0))


def two_form_norm2(U_up, g):
    """|U|^2 = g_ik g_jl U^ij U^kl for a contravariant 2-form."""
    return float(np.einsum("ik,jl,ij,kl->", g, g, U_up, U_up))
