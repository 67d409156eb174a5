import { defineConfig } from "vitest/config";

// every test round-trips through Python subprocesses; give them room
export default defineConfig({
  test: {
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
