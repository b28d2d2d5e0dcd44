import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'sparsecount.settings')
django.setup()
