import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional


CONFIG_ENV_VAR = 'TROPICAL_RB_CONFIG'
DEFAULT_CONFIG_FILE = Path(__file__).resolve().parent / 'config.json'

logger = logging.getLogger(__name__)


class ConfigManager:
    """配置文件管理器"""

    def __init__(self, config_file: Optional[str] = None):
        if config_file is None:
            config_file = os.environ.get(CONFIG_ENV_VAR, str(DEFAULT_CONFIG_FILE))
        self.config_file = config_file
        self.config = self.load_config()

    def load_config(self) -> Dict:
        """加载配置文件"""
        if not os.path.exists(self.config_file):
            logger.warning(f"配置文件不存在，使用默认配置: {self.config_file}")
            return self.get_default_config()
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                loaded = json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"配置文件格式错误: {e}")
            return self.get_default_config()

        # 缺失的段落用默认值补齐
        merged = self.get_default_config()
        for section, values in loaded.items():
            if isinstance(values, dict) and isinstance(merged.get(section), dict):
                merged[section].update(values)
            else:
                merged[section] = values
        return merged

    def get_default_config(self) -> Dict:
        """获取默认配置"""
        return {
            "numeric": {
                "tolerance": 1e-9,
                "default_beta": "inf",
                "seed": 20240517
            },
            "semiring": {
                "grid_step": 1e-4,
                "refine_tolerance": 1e-12,
                "multistart": 12
            },
            "hopf": {
                "edge_cap": 16
            },
            "birkhoff": {
                "certify_samples": 100,
                "sequence_length": 6,
                "series_order": 6,
                "q_sum_terms": 200
            },
            "witt": {
                "order": 8,
                "product_terms": 40
            },
            "apps": {
                "family_vertex_cap": 12,
                "point_count_edge_cap": 6,
                "point_count_prime_cap": 11,
                "step_nonhalting_rate": 0.25,
                "workers": 1
            },
            "output": {
                "log_filename": "tropical_rb.log",
                "encoding": "utf-8",
                "golden_dir": "fixtures"
            },
            "logging": {
                "level": "INFO",
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
            }
        }

    def get(self, key_path: str, default=None):
        """获取配置项，支持点号分隔的路径"""
        keys = key_path.split('.')
        value = self.config

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default
        return value


def setup_logging(config: ConfigManager, level: Optional[str] = None) -> logging.Logger:
    """设置日志"""
    level_name = (level or config.get('logging.level', 'INFO')).upper()
    log_level = getattr(logging, level_name, logging.INFO)
    log_format = config.get('logging.format', '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    log_file = config.get('output.log_filename', 'tropical_rb.log')

    handlers = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.insert(0, logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(
        level=log_level,
        format=log_format,
        handlers=handlers,
        force=True
    )
    return logging.getLogger('tropical_rb')
