import logging

from django.conf import settings
from django.utils.module_loading import import_string
from django_q.tasks import async_iter, async_task, result

logger = logging.getLogger(__name__)


def _use_async():
    return getattr(settings, 'ASYNC_JOBS_ENABLED', False) and not getattr(settings, 'TESTING', False)


def _run_inline(func_path, arg_list):
    func = import_string(func_path)
    return [func(*args) for args in arg_list]


def run_jobs(func_path, arg_list, timeout_ms=None):
    """Run ``func_path(*args)`` for every args tuple; results keep the input order.

    Runs inline in local/test environments, otherwise fans out through the
    Django-Q cluster and waits for the whole batch.
    """
    arg_list = [tuple(args) for args in arg_list]
    if not arg_list:
        return []
    if len(arg_list) == 1 or not _use_async():
        return _run_inline(func_path, arg_list)

    try:
        group_id = async_iter(func_path, arg_list)
        outputs = result(group_id, wait=timeout_ms or -1)
    except Exception:
        logger.exception('Falling back to inline execution for %s.', func_path)
        return _run_inline(func_path, arg_list)

    if outputs is None or len(outputs) != len(arg_list):
        logger.warning('Worker batch for %s incomplete; running inline.', func_path)
        return _run_inline(func_path, arg_list)
    return outputs


def queue_job(func_path, *args):
    """Queue a single job; run it inline when async jobs are disabled. Returns the task id or None."""
    if not _use_async():
        import_string(func_path)(*args)
        return None
    try:
        return async_task(func_path, *args)
    except Exception:
        logger.exception('Falling back to inline execution for %s.', func_path)
        import_string(func_path)(*args)
        return None
