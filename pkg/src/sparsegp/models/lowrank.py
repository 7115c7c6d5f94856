"""FIC, PIC and CS+FIC: low-rank ``Q`` plus a structured ``Lambda_hat``.

With ``Phi = Luu^{-1} K_un`` the training covariance is
``Phi^T Phi + Lambda_hat`` and

    K_y^{-1} = Lambda_hat^{-1} - V V^T,   V = Lambda_hat^{-1} Phi^T Lb^{-T},
    log|K_y| = log|Lambda_hat| + log|B|,  B = I + Phi Lambda_hat^{-1} Phi^T = Lb Lb^T.

``Lambda_hat`` is diagonal (FIC), block diagonal (PIC) or sparse with the
compact kernel's pattern (CS+FIC); only its solve, log-determinant and the
parts of its inverse needed for traces are ever touched.
"""

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial import cKDTree

from ..sparse_linalg import SparseSymMatrix, sparse_trace_product, takahashi_partial_inverse
from ._jitter import jittered_cholesky, jittered_sparse_cholesky
from .spec import PredictiveDistribution

LOG_2PI = np.log(2.0 * np.pi)
PREDICT_CHUNK = 512


class DiagonalLambda:
    def __init__(self, d):
        self.d = d

    def solve(self, B):
        return B / (self.d if B.ndim == 1 else self.d[:, None])

    def log_det(self):
        return float(np.sum(np.log(self.d)))

    def inv_diag(self):
        return 1.0 / self.d


class BlockLambda:
    def __init__(self, blocks, mats, start, max_rel):
        self.blocks = blocks
        self.chols = [jittered_cholesky(M, start, max_rel)[0] for M in mats]

    def solve(self, B):
        out = np.empty_like(B)
        for idx, L in zip(self.blocks, self.chols):
            out[idx] = cho_solve((L, True), B[idx])
        return out

    def log_det(self):
        return float(sum(2.0 * np.sum(np.log(np.diag(L))) for L in self.chols))

    def inv_blocks(self):
        return [cho_solve((L, True), np.eye(L.shape[0])) for L in self.chols]


class SparseLambda:
    def __init__(self, A, start, max_rel):
        self.A = A
        self.factor, self.jitter = jittered_sparse_cholesky(A, start, max_rel)
        self._Z = None

    def solve(self, B):
        return self.factor.solve(B)

    def log_det(self):
        return self.factor.log_det()

    @property
    def Z(self):
        if self._Z is None:
            self._Z = takahashi_partial_inverse(self.factor)
        return self._Z

    def inv_diag(self):
        return self.Z.diagonal()


class LowRankFitState:
    """Everything the objective, gradient and predictions share for one theta."""

    def __init__(self, spec, X, y):
        self.spec = spec
        self.X, self.y = X, y
        n = X.shape[0]
        Xu = spec.inducing.X
        G = spec.global_kernels
        self.Xu = Xu

        Kuu = sum(k.K(Xu) for k in G)
        self.Luu, self.jitter = jittered_cholesky(Kuu, spec.jitter, spec.max_jitter, always=True)
        Kun = sum(k.K(Xu, X) for k in G)
        self.Phi = solve_triangular(self.Luu, Kun, lower=True)
        self.R = solve_triangular(self.Luu, self.Phi, lower=True, trans="T")
        kdiag = sum(k.diag(X) for k in G)

        if spec.kind == "pic":
            blocks = spec.blocks.blocks
            mats = []
            for idx in blocks:
                Kb = sum(k.K(X[idx]) for k in G)
                Pb = self.Phi[:, idx]
                mats.append(Kb - Pb.T @ Pb + spec.noise * np.eye(idx.size))
            self.lam = BlockLambda(blocks, mats, spec.jitter, spec.max_jitter)
        else:
            lam_diag = kdiag - np.sum(self.Phi ** 2, axis=0) + spec.noise
            if spec.kind == "fic":
                self.lam = DiagonalLambda(lam_diag)
            else:
                self.cs_parts = [k.sparse_K(X, grads=True) for k in spec.local_kernels]
                Kcs = self.cs_parts[0][0]
                for extra, _ in self.cs_parts[1:]:
                    Kcs = _sparse_sum(Kcs, extra)
                self.Kcs = Kcs
                self.lam = SparseLambda(Kcs.add_diagonal(lam_diag), spec.jitter, spec.max_jitter)

        self.iLPhi = self.lam.solve(np.ascontiguousarray(self.Phi.T))
        B = np.eye(Xu.shape[0]) + self.Phi @ self.iLPhi
        self.Lb, _ = jittered_cholesky(B, spec.jitter, spec.max_jitter)
        self.V = solve_triangular(self.Lb, self.iLPhi.T, lower=True).T
        iLy = self.lam.solve(y)
        c = solve_triangular(self.Lb, self.Phi @ iLy, lower=True)
        self.alpha = iLy - self.V @ c
        self.log_det = self.lam.log_det() + 2.0 * np.sum(np.log(np.diag(self.Lb)))
        self.nlml = 0.5 * (self.log_det + y @ iLy - c @ c + n * LOG_2PI)

    @property
    def lambda_hat(self):
        """Sparse ``Lambda_hat`` (CS+FIC only)."""
        return self.lam.A

    def _kinv_R(self):
        # P = K_y^{-1} R^T and R P, shared by gradient and prediction
        if not hasattr(self, "_P"):
            T = self.iLPhi - self.V @ (self.V.T @ self.Phi.T)
            self._P = solve_triangular(self.Luu, T.T, lower=True, trans="T").T
            RP = self.R @ self._P
            self._RP = 0.5 * (RP + RP.T)
        return self._P, self._RP

    def gradient(self):
        spec, X, Xu = self.spec, self.X, self.Xu
        alpha, R, V = self.alpha, self.R, self.V
        P, RP = self._kinv_R()
        Ra = R @ alpha
        pic = spec.kind == "pic"
        if pic:
            blocks = spec.blocks.blocks
            kinv_blocks = [Ib - V[idx] @ V[idx].T for idx, Ib in zip(blocks, self.lam.inv_blocks())]
            kinv_trace = sum(np.trace(Kb) for Kb in kinv_blocks)
        else:
            kinv_diag = self.lam.inv_diag() - np.sum(V * V, axis=1)
            kinv_trace = np.sum(kinv_diag)

        local = {k.name: g for k, (_, g) in zip(spec.local_kernels, getattr(self, "cs_parts", []))}
        grads = []
        for k in spec.kernels:
            for p in k.param_names:
                if k.name in local:
                    dK = local[k.name][p]
                    tr = sparse_trace_product(self.lam.Z, dK) - np.sum(V * dK.matvec(V))
                    grads.append(0.5 * (tr - alpha @ dK.matvec(alpha)))
                    continue
                dKuu = k.grad(Xu, None, p)
                dKuu = dKuu + self.jitter * np.mean(np.diag(dKuu)) * np.eye(Xu.shape[0])
                dKun = k.grad(Xu, X, p)
                trQ = 2.0 * np.sum(P * dKun.T) - np.sum(dKuu * RP)
                aQa = 2.0 * (dKun @ alpha) @ Ra - Ra @ dKuu @ Ra
                if pic:
                    trL = aLa = 0.0
                    for idx, Kb in zip(blocks, kinv_blocks):
                        Rb, dKb_u = R[:, idx], dKun[:, idx]
                        cross = dKb_u.T @ Rb
                        dLb = k.grad(X[idx], None, p) - (cross + cross.T - Rb.T @ dKuu @ Rb)
                        trL += np.sum(Kb * dLb)
                        ab = alpha[idx]
                        aLa += ab @ dLb @ ab
                else:
                    dQd = 2.0 * np.sum(dKun * R, axis=0) - np.sum(R * (dKuu @ R), axis=0)
                    dlam = k.diag_grad(X, p) - dQd
                    trL = kinv_diag @ dlam
                    aLa = (alpha * alpha) @ dlam
                grads.append(0.5 * (trQ + trL - aQa - aLa))
        grads.append(0.5 * spec.noise * (kinv_trace - alpha @ alpha))
        return np.array(grads)

    def _predict_parts(self, Xs):
        spec = self.spec
        P, RP = self._kinv_R()
        Ksu = sum(k.K(Xs, self.Xu) for k in spec.global_kernels)
        parts = {
            "global_mean": Ksu @ (self.R @ self.alpha),
            "global_reduction": np.sum((Ksu @ RP) * Ksu, axis=1),
            "global_prior": sum(k.diag(Xs) for k in spec.global_kernels),
        }
        if spec.kind == "csfic":
            C = None
            for k in spec.local_kernels:
                Ck = k.sparse_cross(Xs, self.X)
                C = Ck if C is None else C + Ck
            C = sp.csr_matrix(C)
            parts["local_mean"] = C @ self.alpha
            parts["cross"] = 2.0 * np.sum(Ksu * (C @ P), axis=1)
            CV = C @ self.V
            quad = np.empty(Xs.shape[0])
            for s in range(0, Xs.shape[0], PREDICT_CHUNK):
                block = C[s:s + PREDICT_CHUNK].toarray().T
                W = self.lam.factor.solve_lower(block)
                quad[s:s + PREDICT_CHUNK] = np.sum(W * W, axis=0)
            parts["local_reduction"] = quad - np.sum(CV * CV, axis=1)
            parts["local_prior"] = sum(k.diag(Xs) for k in spec.local_kernels)
        elif spec.kind == "pic" and spec.pic_test == "block":
            parts.update(self._block_parts(Xs, Ksu, P))
        return parts

    def _block_parts(self, Xs, Ksu, P):
        # within its block a test point sees K - Q instead of nothing
        G = self.spec.global_kernels
        _, nearest = cKDTree(self.X).query(Xs)
        owner = self.spec.blocks.labels[nearest]
        ns = Xs.shape[0]
        mean, cross, quad = np.zeros(ns), np.zeros(ns), np.zeros(ns)
        inv_blocks = self.lam.inv_blocks()
        for b, (idx, Ib) in enumerate(zip(self.spec.blocks.blocks, inv_blocks)):
            ts = np.nonzero(owner == b)[0]
            if ts.size == 0:
                continue
            D = sum(k.K(Xs[ts], self.X[idx]) for k in G) - Ksu[ts] @ self.R[:, idx]
            mean[ts] = D @ self.alpha[idx]
            cross[ts] = 2.0 * np.sum(Ksu[ts] * (D @ P[idx]), axis=1)
            DV = D @ self.V[idx]
            quad[ts] = np.sum((D @ Ib) * D, axis=1) - np.sum(DV * DV, axis=1)
        return {"local_mean": mean, "cross": cross, "local_reduction": quad,
                "local_prior": np.zeros(ns)}

    def predict(self, Xs):
        q = self._predict_parts(Xs)
        mean = q["global_mean"]
        var = q["global_prior"] - q["global_reduction"]
        if "local_mean" in q:
            mean = mean + q["local_mean"]
            var = var + q["local_prior"] - q["local_reduction"] - q["cross"]
        return PredictiveDistribution.build(mean, var, self.spec.noise)

    def predict_components(self, Xs):
        if self.spec.kind != "csfic":
            raise ValueError(f"{self.spec.kind} has a single (approximated) component")
        q = self._predict_parts(Xs)
        noise = self.spec.noise
        glob = PredictiveDistribution.build(
            q["global_mean"], q["global_prior"] - q["global_reduction"], noise)
        loc = PredictiveDistribution.build(
            q["local_mean"], q["local_prior"] - q["local_reduction"], noise)
        return {"+".join(k.name for k in self.spec.global_kernels): glob,
                "+".join(k.name for k in self.spec.local_kernels): loc}


def _sparse_sum(A, B):
    return SparseSymMatrix.from_scipy(A.lower() + B.lower())
