"""Paraver object models: virtual process hierarchy and physical resources.

The process model is the WORKLOAD -> APPLICATION -> TASK -> THREAD forest
onto which programming-model entities (MPI ranks, worker threads) are
mapped; the resource model is the SYSTEM -> NODE -> CPU taxonomy. All
identifiers are 1-based and contiguous, following the Paraver convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

from .errors import IdentityRangeError, InvalidModelError, LifecycleError


@dataclass(frozen=True)
class Task:
    thread_count: int
    node_index: int  # 1-based reference into the paired ResourceModel


@dataclass(frozen=True)
class Application:
    tasks: tuple[Task, ...]


@dataclass(frozen=True)
class ProcessModel:
    applications: tuple[Application, ...]

    @property
    def total_tasks(self) -> int:
        return sum(len(a.tasks) for a in self.applications)

    @property
    def total_threads(self) -> int:
        return sum(t.thread_count for a in self.applications for t in a.tasks)

    def task(self, appl: int, task: int) -> Task:
        return self.applications[appl - 1].tasks[task - 1]

    def contains(self, appl: int, task: int, thread: int) -> bool:
        if not 1 <= appl <= len(self.applications):
            return False
        tasks = self.applications[appl - 1].tasks
        if not 1 <= task <= len(tasks):
            return False
        return 1 <= thread <= tasks[task - 1].thread_count

    def iter_threads(self) -> Iterator[tuple[int, int, int]]:
        """Yield every (appl, task, thread) coordinate in model order."""
        for ai, appl in enumerate(self.applications, start=1):
            for ti, task in enumerate(appl.tasks, start=1):
                for th in range(1, task.thread_count + 1):
                    yield (ai, ti, th)

    def iter_tasks(self) -> Iterator[tuple[int, int]]:
        for ai, appl in enumerate(self.applications, start=1):
            for ti in range(1, len(appl.tasks) + 1):
                yield (ai, ti)


@dataclass(frozen=True)
class Node:
    cpu_count: int


@dataclass(frozen=True)
class ResourceModel:
    nodes: tuple[Node, ...]

    @property
    def total_cpus(self) -> int:
        return sum(n.cpu_count for n in self.nodes)


@dataclass(frozen=True)
class Location:
    """Coordinate of one record on both object models.

    cpu 0 means unknown/unpinned; threads may migrate between cpus
    without invalidating the (appl, task, thread) mapping.
    """

    cpu: int
    appl: int
    task: int
    thread: int


def build_model(
    n_applications: int,
    tasks_per_application: Sequence[int],
    threads_per_task: Sequence[int],
    task_node_assignment: Mapping[int, int],
    cpus_per_node: Sequence[int],
) -> tuple[ProcessModel, ResourceModel]:
    """Construct and validate both taxonomies.

    ``threads_per_task`` and ``task_node_assignment`` are indexed by the
    global 1-based task number, counting tasks application-major.
    Deterministic: the same inputs always give identical models.
    """
    if n_applications < 1:
        raise InvalidModelError("need at least one application")
    if len(tasks_per_application) != n_applications:
        raise InvalidModelError(
            f"tasks_per_application has {len(tasks_per_application)} entries "
            f"for {n_applications} applications"
        )
    if any(c < 1 for c in tasks_per_application):
        raise InvalidModelError("every application needs at least one task")
    total_tasks = sum(tasks_per_application)
    if len(threads_per_task) != total_tasks:
        raise InvalidModelError(
            f"threads_per_task has {len(threads_per_task)} entries for {total_tasks} tasks"
        )
    if any(c < 1 for c in threads_per_task):
        raise InvalidModelError("thread_count must be >= 1 for every task")
    if not cpus_per_node or any(c < 1 for c in cpus_per_node):
        raise InvalidModelError("every node needs at least one cpu")

    resources = ResourceModel(tuple(Node(c) for c in cpus_per_node))

    applications = []
    global_task = 0
    for ntasks in tasks_per_application:
        tasks = []
        for _ in range(ntasks):
            global_task += 1
            if global_task not in task_node_assignment:
                raise InvalidModelError(f"task {global_task} has no node assignment")
            node = task_node_assignment[global_task]
            if not 1 <= node <= len(resources.nodes):
                raise InvalidModelError(
                    f"task {global_task} references node {node}, "
                    f"but only {len(resources.nodes)} node(s) exist"
                )
            tasks.append(Task(threads_per_task[global_task - 1], node))
        applications.append(Application(tuple(tasks)))

    return ProcessModel(tuple(applications)), resources


def single_node_model(
    n_tasks: int, threads_per_task: int = 1, cpus: int | None = None
) -> tuple[ProcessModel, ResourceModel]:
    """One application, all tasks on one node (the evaluation layout)."""
    return build_model(
        1,
        [n_tasks],
        [threads_per_task] * n_tasks,
        {t: 1 for t in range(1, n_tasks + 1)},
        [cpus if cpus is not None else n_tasks * threads_per_task],
    )


class IdentityProvider:
    """Callbacks that locate the current execution point on the process model.

    The four callbacks mirror the taskid/numtasks and threadid/numthreads
    routines; custom programming models remap them (a distributed-worker
    pool maps worker w of n to task_id=w, num_tasks=n). Callbacks must be
    safe to invoke concurrently. Once a tracer is initialized with a
    provider, the provider is bound and can no longer be remapped, so a
    trace's coordinate space stays stable.
    """

    def __init__(
        self,
        task_id_fn: Callable[[], int] | None = None,
        num_tasks_fn: Callable[[], int] | None = None,
        thread_id_fn: Callable[[], int] | None = None,
        num_threads_fn: Callable[[], int] | None = None,
    ):
        self.task_id_fn = task_id_fn or (lambda: 1)
        self.num_tasks_fn = num_tasks_fn or (lambda: 1)
        self.thread_id_fn = thread_id_fn or (lambda: 1)
        self.num_threads_fn = num_threads_fn or (lambda: 1)
        self._bound = False

    def bind(self) -> None:
        self._bound = True

    def _check_unbound(self) -> None:
        if self._bound:
            raise LifecycleError("identity functions may only be replaced before tracer init")


def set_taskid_function(
    provider: IdentityProvider,
    fn: Callable[[], int],
    num_fn: Callable[[], int] | None = None,
) -> IdentityProvider:
    provider._check_unbound()
    provider.task_id_fn = fn
    if num_fn is not None:
        provider.num_tasks_fn = num_fn
    return provider


def set_threadid_function(
    provider: IdentityProvider,
    fn: Callable[[], int],
    num_fn: Callable[[], int] | None = None,
) -> IdentityProvider:
    provider._check_unbound()
    provider.thread_id_fn = fn
    if num_fn is not None:
        provider.num_threads_fn = num_fn
    return provider


def resolve_location(
    provider: IdentityProvider, model: ProcessModel, cpu: int = 0
) -> Location:
    """Resolve the current (appl, task, thread) coordinate.

    The tracer records against application 1; multi-application bundles
    are supported by the trace format but not produced by this path.
    Raises IdentityRangeError if a callback strays outside the model.
    """
    task = provider.task_id_fn()
    num_tasks = provider.num_tasks_fn()
    thread = provider.thread_id_fn()
    num_threads = provider.num_threads_fn()
    if not 1 <= task <= num_tasks:
        raise IdentityRangeError(f"task id {task} outside 1..{num_tasks}")
    if not 1 <= thread <= num_threads:
        raise IdentityRangeError(f"thread id {thread} outside 1..{num_threads}")
    if not model.contains(1, task, thread):
        raise IdentityRangeError(
            f"(appl=1, task={task}, thread={thread}) does not exist in the process model"
        )
    return Location(cpu=cpu, appl=1, task=task, thread=thread)
