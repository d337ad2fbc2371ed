import json

from django.core.exceptions import ValidationError

from annealing.models import Problem, Run


def print_run(run_id=None):
    print("\n" + "=" * 60)
    print("RUN")
    print("=" * 60)

    try:
        if run_id:
            run = Run.objects.get(id=run_id)
        else:
            run = Run.objects.order_by('-created_at').first()
            print("(Showing latest run because no ID was provided)")

        if run:
            print(f"Run ID:    {run.id}")
            print(f"Command:   {run.command}")
            print(f"Status:    {run.status}")
            print(f"Directory: {run.output_dir}")
            if run.error_message:
                print(f"Error:     {run.error_message}")
            print("-" * 60)
            print("Parameters:")
            print(json.dumps(run.manifest.get('parameters', {}), indent=4, sort_keys=True))
        else:
            print("No runs found in the database.")

    except Run.DoesNotExist:
        print(f"Error: Run with ID '{run_id}' does not exist.")
    except ValidationError:
        print(f"Error: '{run_id}' is not a valid UUID format.")


def print_problem(label):
    try:
        problem = Problem.objects.get(label=label)
    except Problem.DoesNotExist:
        print(f"Error: no problem labelled '{label}'.")
        return
    print(f"{problem.label}: N={problem.n_vars}, {len(problem.clauses)} clauses, "
          f"{problem.solution_count} solutions ({problem.source})")
    for a, b in problem.clauses:
        print(f"  ({a:+d} v {b:+d})")
    print(f"Runs: {problem.runs.count()}")


def run(*args):
    """
    Usage:
        python manage.py runscript inspect_runs --script-args latest
        python manage.py runscript inspect_runs --script-args run <uuid>
        python manage.py runscript inspect_runs --script-args problem 230
    """
    command = args[0].lower() if args else 'latest'
    target = args[1] if len(args) > 1 else None

    if command == 'run':
        print_run(target)
    elif command == 'problem' and target:
        print_problem(target)
    elif command == 'latest':
        print_run()
    else:
        print(f"Unknown argument: '{command}'. Please use 'run', 'problem <label>', or 'latest'.")
