"""
Configuration Module for the npLCM regression engine
"""
import os
import logging

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)


class Config:
    """Base configuration for the npLCM engine."""

    # Environment
    NPLCM_ENV = os.getenv('NPLCM_ENV', 'development')
    DEBUG = NPLCM_ENV == 'development'

    # --- Sampler defaults (three chains, 10k burn-in, 10k kept) ---
    DEFAULT_CHAINS = int(os.getenv('DEFAULT_CHAINS', 3))
    DEFAULT_BURNIN = int(os.getenv('DEFAULT_BURNIN', 10000))
    DEFAULT_KEEP = int(os.getenv('DEFAULT_KEEP', 10000))
    DEFAULT_THIN = int(os.getenv('DEFAULT_THIN', 1))
    CHECKPOINT_EVERY = int(os.getenv('CHECKPOINT_EVERY', 1000))

    # --- Parallel execution ---
    EXECUTOR_BACKEND = os.getenv('EXECUTOR_BACKEND', 'local')  # 'local' or 'celery'
    MAX_WORKERS = int(os.getenv('MAX_WORKERS', os.cpu_count() or 1))

    # Celery (only used with EXECUTOR_BACKEND=celery)
    CELERY_BROKER_URL = os.getenv('CELERY_BROKER_URL', 'redis://localhost:6379/1')
    CELERY_RESULT_BACKEND = os.getenv('CELERY_RESULT_BACKEND', 'redis://localhost:6379/2')
    CELERY_TASK_TIME_LIMIT = int(os.getenv('CELERY_TASK_TIME_LIMIT', 6 * 3600))

    # --- Monitoring ---
    METRICS_ENABLED = os.getenv('METRICS_ENABLED', 'true').lower() == 'true'

    # --- Logging ---
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    LOG_FILE = os.getenv('LOG_FILE', 'nplcm.log')

    @classmethod
    def init_app(cls):
        """Log the active environment; commands create their own --out directories."""
        logger.info(f"Configuration initialized for {cls.NPLCM_ENV} environment")

    @classmethod
    def validate(cls):
        """Validate configuration; returns True when no issues were found."""
        issues = []

        if cls.EXECUTOR_BACKEND not in ('local', 'celery'):
            issues.append(f"Unknown EXECUTOR_BACKEND '{cls.EXECUTOR_BACKEND}'")
        if cls.DEFAULT_CHAINS < 1:
            issues.append("DEFAULT_CHAINS must be at least 1")
        if cls.DEFAULT_KEEP < 1:
            issues.append("DEFAULT_KEEP must be at least 1")
        if cls.DEFAULT_THIN < 1:
            issues.append("DEFAULT_THIN must be at least 1")
        if cls.MAX_WORKERS < 1:
            issues.append("MAX_WORKERS must be at least 1")

        if issues:
            warning_msg = "\n".join(issues)
            logger.warning(f"Configuration warnings:\n{warning_msg}")

        return len(issues) == 0


class DevelopmentConfig(Config):
    """Development configuration."""
    DEBUG = True
    TESTING = False


class ProductionConfig(Config):
    """Production configuration."""
    DEBUG = False
    TESTING = False

    @classmethod
    def init_app(cls):
        super().init_app()
        handler = logging.FileHandler(cls.LOG_FILE)
        handler.setFormatter(logging.Formatter(cls.LOG_FORMAT))
        logging.getLogger().addHandler(handler)


class TestingConfig(Config):
    """Testing configuration."""
    TESTING = True
    DEBUG = True
    METRICS_ENABLED = False
    EXECUTOR_BACKEND = 'local'


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}
