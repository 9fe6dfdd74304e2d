import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the integration suite boots the Python service and a federation job
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
