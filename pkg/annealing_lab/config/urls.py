"""
URL configuration for the annealing lab.

The REST API lives under /api/ (see annealing/urls.py); the admin lists
problems and runs.
"""
from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/', include('annealing.urls')),
]
