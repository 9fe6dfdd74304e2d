import { EventStream, ServiceClient } from "./client.js";
import { forceLayout } from "./layout.js";
import {
  byId,
  countsLine,
  epsilonCurveSvg,
  graphSvg,
  mount,
  statusBanner,
} from "./render.js";
import { ViewModel, type Channel } from "./viewmodel.js";

/**
 * Browser bootstrap.  Everything interesting lives in the view model and
 * the pure renderers; this file only wires DOM events to client calls.
 */
async function boot(): Promise<void> {
  const base = (byId("console") as HTMLElement).dataset.service ?? "";
  const client = new ServiceClient(base);
  const vm = new ViewModel();

  const redraw = (positions: ReturnType<typeof forceLayout>) => {
    mount(byId("graph"), graphSvg(vm, positions));
    mount(byId("counts"), countsLine(vm));
    mount(byId("banner"), statusBanner(vm));
  };

  const created = await client.createScenario({
    topology: { n: 50, model: "subnet-blocks", k: 5, p_in: 0.4, p_out: 0.02 },
    preset: "ddos",
    seed: 1,
  });
  vm.loadScenario(created);
  const positions = forceLayout(vm.n, vm.edges, created.seed);
  redraw(positions);

  const refreshState = async () => {
    vm.applyState(await client.getState(vm.scenarioId));
    redraw(positions);
  };

  const stream = new EventStream(
    client,
    vm.scenarioId,
    {
      onEvent: (record) => {
        vm.ingest(record);
        redraw(positions);
      },
      onStatus: (status) => {
        vm.connection = status;
        mount(byId("banner"), statusBanner(vm));
      },
    },
    vm.cursor,
  );
  void stream.run();

  byId("step")?.addEventListener("click", () => {
    void client.step(vm.scenarioId, 1);
  });

  byId("channel")?.addEventListener("change", (ev) => {
    vm.channel = (ev.target as HTMLSelectElement).value as Channel;
    void refreshState();
  });

  byId("graph")?.addEventListener("click", (ev) => {
    const target = ev.target as SVGElement;
    const vertex = target.dataset?.vertex;
    if (vertex !== undefined) {
      vm.selectAction({ kind: "quarantine", vertex: Number(vertex), duration: 5 });
      mount(byId("palette"), `quarantine vertex ${vertex} for 5 steps? <button id="confirm">apply</button>`);
      byId("confirm")?.addEventListener("click", () => {
        void client
          .postActions(vm.scenarioId, [vm.takePendingAction()])
          .catch((err) => mount(byId("palette"), `<span class="error">${err.message}</span>`));
        mount(byId("palette"), "");
      });
    }
  });

  byId("forecast")?.addEventListener("click", async () => {
    try {
      vm.applyForecast(await client.forecast(vm.scenarioId, 3));
      vm.channel = "forecast";
      redraw(positions);
    } catch (err) {
      mount(byId("palette"), `<span class="error">${(err as Error).message}</span>`);
    }
  });

  byId("plan")?.addEventListener("click", async () => {
    const plan = await client.plan(vm.scenarioId, { budget: 2 });
    mount(
      byId("palette"),
      `suggested plan (J=${plan.objective.toFixed(2)} vs ${plan.baseline_objective.toFixed(2)}): ` +
        plan.plan.map((a) => `${a.kind} ${a.vertex ?? a.edge}`).join("; "),
    );
  });

  byId("federate")?.addEventListener("click", async () => {
    const job = await client.createJob({ clients: 3, rounds: 5, noise: 1.0 });
    const done = await client.waitForJob(job.job_id);
    mount(byId("federation"), epsilonCurveSvg(done.rounds));
  });

  void refreshState();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => {
    void boot();
  });
}
