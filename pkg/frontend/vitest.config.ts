import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 180_000,
    // the e2e spec spawns one uvicorn server per file; keep files sequential
    fileParallelism: false,
  },
});
