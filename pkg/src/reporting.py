import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.config import OUTPUT_DIR, VERSION  # noqa: E402

logger = logging.getLogger("PYL.reporting")

# SVG 里的元素 id 由 hashsalt 决定; 固定下来才能逐字节复现
plt.rcParams["svg.hashsalt"] = "spectrum-lab"
plt.rcParams["svg.fonttype"] = "none"

FLOAT_FORMAT = "%.6f"


class ReportManager:
    def __init__(self, output_dir=None, metadata=None, plots=True):
        """
        :param output_dir: 输出目录, None 时用 OUTPUT_DIR/<experiment>
        :param metadata: 写进每个 CSV 头部 '#' 注释块的键值 (config_hash, seed, command ...)
        :param plots: False 时 add_figure 只关闭图, 不写 SVG
        """
        self.metadata = {"tool_version": VERSION}
        self.metadata.update(metadata or {})
        if output_dir:
            self.report_dir = Path(output_dir)
        else:
            self.report_dir = OUTPUT_DIR / str(self.metadata.get("experiment", "run"))
        self.plots = plots
        self.written = []
        self.report_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"📝 Report initialized. Output Path: {self.report_dir}")

    def _header_lines(self, extra=None):
        meta = dict(self.metadata)
        meta.update(extra or {})
        return [f"# {key}: {meta[key]}" for key in sorted(meta)]

    def save_data(self, df, filename, extra_metadata=None):
        """
        DataFrame -> CSV: '#' 元数据块 + 表头, LF 换行, 固定浮点格式。
        同样的 df 和 metadata 总是得到同样的字节。
        """
        if df is None or df.empty:
            logger.warning(f"⚠️ Attempted to save an empty table: {filename}")
            return None
        if not filename.endswith(".csv"):
            filename += ".csv"
        filepath = self.report_dir / filename

        body = df.to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
        with open(filepath, "w", encoding="utf-8", newline="") as f:
            f.write("\n".join(self._header_lines(extra_metadata)) + "\n")
            f.write(body)
        self.written.append(filepath)
        logger.info(f"💾 Data saved: {filepath} (Rows: {len(df)})")
        return filepath

    def add_figure(self, fig, filename_tag):
        """保存为 SVG (不带日期元数据); plots=False 时只释放图"""
        if fig is None:
            logger.warning(f"⚠️ add_figure called with None for tag: {filename_tag}")
            return None
        if not self.plots:
            plt.close(fig)
            return None
        filepath = self.report_dir / f"{filename_tag}.svg"
        try:
            fig.savefig(filepath, format="svg", bbox_inches="tight", metadata={"Date": None})
        finally:
            plt.close(fig)
        self.written.append(filepath)
        logger.info(f"🖼️  Figure saved: {filepath.name}")
        return filepath


def line_figure(df, x, columns, title, xlabel, ylabel, logy=False):
    """实验表格 -> 简单折线图"""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for col in columns:
        ax.plot(df[x].values, df[col].values, marker="o", markersize=3, linewidth=1.5, label=col)
    if logy:
        ax.set_yscale("log")
    ax.set_title(title, fontsize=11, fontweight="bold")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    return fig
