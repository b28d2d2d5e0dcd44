"""
Django settings for the sparsecount project.

The project has no database, no web surface and no templates: Django
supplies the management-command layer, the settings registry and the test
runner. Every tunable comes from the environment (or a .env file).
"""

from os import getenv
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Unused without sessions or signing, but Django refuses to start without one
SECRET_KEY = getenv('DJANGO_SECRET_KEY', 'sparsecount-local')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'sparsecount',
    'experiments',
]

DATABASES = {}


def _flag(value):
    return str(value).strip().lower() in ('1', 'true', 'yes', 'on')


# Library defaults, passed down explicitly by commands and runners

SPARSECOUNT_EXACT_SIDE_LIMIT = int(getenv('SPARSECOUNT_EXACT_SIDE_LIMIT', 14))
SPARSECOUNT_WITNESS_BUDGET = int(getenv('SPARSECOUNT_WITNESS_BUDGET', 16))
SPARSECOUNT_MAX_REJECTS = int(getenv('SPARSECOUNT_MAX_REJECTS', 200))
SPARSECOUNT_WORKERS = int(getenv('SPARSECOUNT_WORKERS', 1))
SPARSECOUNT_OUTPUT_DIR = getenv('SPARSECOUNT_OUTPUT_DIR', 'reports')
# When off, wall_ms and total_wall_ms are written as 0 and reruns match byte for byte
SPARSECOUNT_RECORD_WALL_TIME = _flag(getenv('SPARSECOUNT_RECORD_WALL_TIME', 'true'))
SPARSECOUNT_LOG_LEVEL = getenv('SPARSECOUNT_LOG_LEVEL', 'INFO').upper()
SPARSECOUNT_VERSION = getenv('SPARSECOUNT_VERSION', '0.1.0')


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# Logging
# stdout carries command results; log lines go to stderr

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': SPARSECOUNT_LOG_LEVEL,
    },
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
