import logging
from pathlib import Path

# ==========================================
# 1. 基础路径配置
# ==========================================
# 获取项目的根目录
ROOT_DIR = Path(__file__).resolve().parent.parent

# 示例实验配置 (YAML)
CONFIG_DIR = ROOT_DIR / "configs"

# 定义输出目录 (CSV / SVG 都写到这里, 由 ReportManager 负责创建)
OUTPUT_DIR = ROOT_DIR / "outputs"

VERSION = "0.3.0"

# ==========================================
# 2. 内置信道集合
# ==========================================
# 每一行: (p11, p10, p00, p01)
# baseline: 四个仿真图共用的同构信道
BASELINE_ROW = (0.9, 0.1, 0.8, 0.2)

# table1: 非同构的 4 条信道 (攻击策略对比实验)
TABLE1_ROWS = (
    (0.9, 0.1, 0.8, 0.2),
    (0.95, 0.05, 0.8, 0.2),
    (0.9, 0.1, 0.85, 0.15),
    (0.95, 0.05, 0.85, 0.15),
)

BUILTIN_CHANNEL_SETS = {
    "baseline": (BASELINE_ROW,),   # 按 N 复制
    "table1": TABLE1_ROWS,
}

# ==========================================
# 3. 仿真默认值
# ==========================================
SIM_DEFAULTS = {
    "horizon": 100_000,
    "warmup": 10_000,
    "replications": 50,
    "workers": 1,
}

# 数值容差
ROW_SUM_TOL = 1e-9
SIMPLEX_TOL = 1e-9
TP_TAIL_MASS = 1e-12
TP_MAX_TRUNCATION = 1_000_000
POWER_ITER_TOL = 1e-12
NEWTON_TOL = 1e-10
# 攻击方牛顿法: KKT 残差上限, 牛顿减量停止阈值, 线搜索相对精度
KKT_TOL = 1e-8
DECREMENT_TOL = 1e-20
LINE_SEARCH_RTOL = 1e-14

# 统计检验使用的标准误倍数
SE_MULTIPLIER = 3.0

# ==========================================
# 4. 日志配置
# ==========================================
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

logger = logging.getLogger("PYL")
logger.setLevel(logging.INFO)


def setup_logging(level=logging.INFO):
    """给 "PYL" 根 logger 挂一个控制台 handler (重复调用不会重复挂)"""
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=LOG_DATEFMT))
        logger.addHandler(handler)
    logger.setLevel(level)
    return logger


if __name__ == "__main__":
    setup_logging()
    logger.info("✅ Config Loaded.")
    logger.info(f"📂 ROOT_DIR:   {ROOT_DIR}")
    logger.info(f"📡 Builtin channel sets: {sorted(BUILTIN_CHANNEL_SETS)}")
