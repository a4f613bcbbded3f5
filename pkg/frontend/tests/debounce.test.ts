import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { DebouncedRequester, MIN_DEBOUNCE_MS } from "../src/debounce.js";

describe("DebouncedRequester", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  function deferred<T>() {
    let resolve!: (value: T) => void;
    const promise = new Promise<T>((r) => {
      resolve = r;
    });
    return { promise, resolve };
  }

  it("issues exactly one request per settled burst of slider moves", async () => {
    const applied: number[] = [];
    let counter = 0;
    const requester = new DebouncedRequester<number>(
      () => Promise.resolve(++counter),
      (value) => applied.push(value),
    );

    // drag sigma from 3.0 to 6.0 in 0.1 steps: thirty rapid triggers
    for (let i = 0; i < 30; i++) {
      requester.trigger();
      vi.advanceTimersByTime(20); // below the debounce delay
    }
    expect(requester.issuedCount).toBe(0); // nothing until the input settles

    await vi.advanceTimersByTimeAsync(MIN_DEBOUNCE_MS);
    expect(requester.issuedCount).toBe(1);
    expect(applied).toEqual([1]);

    // a second settle issues a second request
    requester.trigger();
    await vi.advanceTimersByTimeAsync(MIN_DEBOUNCE_MS);
    expect(requester.issuedCount).toBe(2);
    expect(applied).toEqual([1, 2]);
  });

  it("rejects delays below the 250 ms floor", () => {
    expect(
      () => new DebouncedRequester<number>(() => Promise.resolve(1), () => {}, () => {}, 100),
    ).toThrow(/250/);
  });

  it("keeps at most one request in flight and coalesces follow-ups", async () => {
    const gates: { promise: Promise<number>; resolve: (v: number) => void }[] = [];
    const applied: number[] = [];
    const requester = new DebouncedRequester<number>(
      () => {
        const gate = deferred<number>();
        gates.push(gate);
        return gate.promise;
      },
      (value) => applied.push(value),
    );

    requester.trigger();
    await vi.advanceTimersByTimeAsync(MIN_DEBOUNCE_MS);
    expect(gates.length).toBe(1);

    // five more settles while the first request is still in flight
    for (let i = 0; i < 5; i++) {
      requester.trigger();
      await vi.advanceTimersByTimeAsync(MIN_DEBOUNCE_MS);
    }
    expect(gates.length).toBe(1); // still only one in flight

    gates[0]!.resolve(111);
    await vi.advanceTimersByTimeAsync(0);
    expect(gates.length).toBe(2); // exactly one coalesced follow-up

    gates[1]!.resolve(222);
    await vi.advanceTimersByTimeAsync(0);
    expect(gates.length).toBe(2);
    expect(applied).toEqual([222]); // superseded response was discarded
  });

  it("discards a stale response by sequence number", async () => {
    const gates: { promise: Promise<string>; resolve: (v: string) => void }[] = [];
    const applied: string[] = [];
    const requester = new DebouncedRequester<string>(
      () => {
        const gate = deferred<string>();
        gates.push(gate);
        return gate.promise;
      },
      (value) => applied.push(value),
    );

    requester.trigger();
    await vi.advanceTimersByTimeAsync(MIN_DEBOUNCE_MS);
    requester.trigger(); // supersedes the in-flight request
    await vi.advanceTimersByTimeAsync(MIN_DEBOUNCE_MS);

    gates[0]!.resolve("stale");
    await vi.advanceTimersByTimeAsync(0);
    expect(applied).toEqual([]); // stale body never applied

    gates[1]!.resolve("fresh");
    await vi.advanceTimersByTimeAsync(0);
    expect(applied).toEqual(["fresh"]);
  });

  it("routes the latest failure to the error handler", async () => {
    const errors: string[] = [];
    const requester = new DebouncedRequester<number>(
      () => Promise.reject(new Error("boom")),
      () => {},
      (error) => errors.push((error as Error).message),
    );
    requester.trigger();
    await vi.advanceTimersByTimeAsync(MIN_DEBOUNCE_MS);
    expect(errors).toEqual(["boom"]);
  });

  it("cancel drops a pending debounce", async () => {
    const requester = new DebouncedRequester<number>(
      () => Promise.resolve(1),
      () => {},
    );
    requester.trigger();
    requester.cancel();
    await vi.advanceTimersByTimeAsync(MIN_DEBOUNCE_MS * 2);
    expect(requester.issuedCount).toBe(0);
  });
});
