# 运行默认值：预算、容差、并发与序列化设置。
# 配置文件中的同名键会覆盖这里的值。
import os

# ---- 预算 ----
max_cells = 16384          # build_mesh 允许的最大 n-单形个数 M^n
dense_limit = 4000         # 稠密特征分解 / 热核矩阵允许的最大顶点数
partial_count = 200        # Lanczos 路径默认求取的特征对个数
max_pairs = 200_000_000    # 单次双重求和允许枚举的最大点对数

# ---- 几何 ----
dedup_rel_tol = 1e-9       # 顶点去重容差（乘以 L^{-n}）
collision_factor = 1e3     # 去重后两个不同顶点的最小允许间距（乘以去重容差）
nesting_sample_depth = 2   # 嵌套公理抽样检查时每个单元向下细分的层数
separation_sample_depth = 2
separation_probe_levels = (1, 2, 3)

# ---- 重整化与谱 ----
renorm_tol = 1e-12
renorm_max_iter = 500
renorm_residual_tol = 1e-10
eig_residual_tol = 1e-8
kernel_floor = 1e-14       # 亚高斯核截断阈值

# ---- 验证容差 ----
exponent_tol = 0.15
heat_slope_tol = 0.1
stability_factor = 3.0
ahlfors_stability_factor = 2.0
truncation_slack = 1e-10
identity_tol = 1e-10

# ---- 并发 ----
pair_chunk = 1024          # 每个任务处理的源顶点数，与线程数无关
default_workers = min(8, os.cpu_count() or 1)

# ---- 序列化 ----
csv_float_format = "%.17g"

# ---- 缓存 ----
CACHE_ENV_VAR = "FRACTAL_POINCARE_CACHE"
default_cache_dir = os.path.join(os.path.expanduser("~"), ".cache", "fractal_poincare")


def get_cache_dir() -> str:
    """返回缓存目录，环境变量 FRACTAL_POINCARE_CACHE 优先。"""
    return os.environ.get(CACHE_ENV_VAR) or default_cache_dir
