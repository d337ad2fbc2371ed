from django.urls import path, include
from rest_framework.routers import DefaultRouter

from .views import ProblemViewSet, RunViewSet

router = DefaultRouter()
router.register(r'problems', ProblemViewSet)
router.register(r'runs', RunViewSet)

urlpatterns = [
    path('', include(router.urls)),
    path('auth/', include('rest_framework.urls', namespace='rest_framework')),
]
