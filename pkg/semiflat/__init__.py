"""T³ 上的半平坦约化：周期网格、Hessian 度量场、IIB/KR 演化与对偶性验证。"""
