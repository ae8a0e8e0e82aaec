"""
🔧 Colab Compatibility Module
=============================
Shared utilities for running the discord tools both locally AND in Google Colab! 🚀

This module auto-detects the environment and provides:
- 🖨️ Console output that survives non-UTF-8 terminals (safe_print)
- 📝 Logging setup shared by every tool
- 💾 Output folder for run files and reports (local folder vs /content)
- 🧵 Worker-pool sizing from DISCORD_CERT_THREADS

Usage:
    from colab_compat import ColabCompat, safe_print
    compat = ColabCompat()
    out_dir = compat.ensure_output_folder()
"""

import logging
import os
import sys
from pathlib import Path

THREADS_ENV_VAR = "DISCORD_CERT_THREADS"
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


# Fix Windows console encoding for emojis
def safe_print(text):
    """Print with fallback for Windows console encoding issues."""
    try:
        print(text)
    except UnicodeEncodeError:
        # Remove emojis for Windows console
        import re
        clean_text = re.sub(r'[\U0001F000-\U0001F9FF\U00002700-\U000027BF]', '', text)
        print(clean_text)


# Set UTF-8 mode for Windows if possible
if sys.platform == 'win32':
    try:
        sys.stdout.reconfigure(encoding='utf-8')
    except (AttributeError, Exception):
        pass  # reconfigure not available


def setup_logging(verbosity: int = 0) -> None:
    """
    Configure root logging for a CLI run.

    Args:
        verbosity: 0 → WARNING, 1 → INFO, 2+ → DEBUG
    """
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


class ColabCompat:
    """
    🌐 Environment compatibility layer for Local + Colab execution!

    Automatically detects whether running in:
    - Google Colab (writes under /content)
    - Local Python (writes under the current directory)
    """

    def __init__(self, output_folder_name="discord_runs"):
        """
        Initialize the compatibility layer! 🚀

        Args:
            output_folder_name: Name of folder for run files and reports
        """
        self.output_folder_name = output_folder_name
        self.in_colab = 'google.colab' in sys.modules
        self.in_jupyter = 'ipykernel' in sys.modules

        if self.in_colab:
            self.base_path = Path("/content")
        else:
            self.base_path = Path.cwd()
        self.output_path = self.base_path / output_folder_name

    def print_environment(self):
        """Print detected environment info!"""
        env_type = "Google Colab" if self.in_colab else "Local Python"
        safe_print(f"\n{'='*50}")
        safe_print(f"Environment Detected: {env_type}")
        safe_print(f"Output Path: {self.output_path}")
        safe_print(f"Workers: {self.worker_count()}")
        safe_print(f"Python: {sys.version.split()[0]}")
        safe_print(f"{'='*50}\n")

    def ensure_output_folder(self) -> Path:
        """Ensure output folder exists! 📁"""
        self.output_path.mkdir(parents=True, exist_ok=True)
        return self.output_path

    @staticmethod
    def worker_count() -> int:
        """
        Worker-pool size: DISCORD_CERT_THREADS when set, else the CPU count.

        Unparseable or non-positive values fall back to a single worker.
        """
        raw = os.environ.get(THREADS_ENV_VAR)
        if raw is None or raw.strip() == "":
            return os.cpu_count() or 1
        try:
            value = int(raw)
        except ValueError:
            logging.getLogger(__name__).warning(
                f"⚠️ {THREADS_ENV_VAR}={raw!r} is not an integer, using 1 worker"
            )
            return 1
        return max(1, value)

    def display_dataframe(self, df):
        """
        Display a DataFrame nicely! 📊

        In Colab/Jupyter: Rich HTML display
        Locally: Print to console
        """
        if self.in_colab or self.in_jupyter:
            from IPython.display import display
            display(df)
        else:
            safe_print(df.to_string(index=False))
