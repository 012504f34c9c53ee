/** Slippy-tile map with two layers (hillshade base + overlay) on a
 * plain DOM of absolutely positioned <img> elements. Tile addressing
 * is the usual z/x/y square: zoom z is a 2^z x 2^z grid of tile_px
 * tiles; the server pads tiles past the texture with transparency.
 */

export interface TileAddress {
  z: number;
  x: number;
  y: number;
}

export interface Viewport {
  /** Container size in CSS pixels. */
  width: number;
  height: number;
  /** Pan offset: canvas pixel that sits at the container's top-left. */
  originX: number;
  originY: number;
  zoom: number;
  tilePx: number;
}

/** Smallest zoom whose tile square covers maxDim pixels. */
export function maxZoomFor(maxDim: number, tilePx: number): number {
  let z = 0;
  while (tilePx * 2 ** z < maxDim) z += 1;
  return z;
}

export function tileUrl(template: string, t: TileAddress): string {
  return template
    .replace("{z}", String(t.z))
    .replace("{x}", String(t.x))
    .replace("{y}", String(t.y));
}

/** Tiles intersecting the viewport, clamped to the zoom's square. */
export function visibleTiles(view: Viewport): TileAddress[] {
  const n = 2 ** view.zoom;
  const first = (o: number) => Math.max(0, Math.floor(o / view.tilePx));
  const last = (o: number, size: number) =>
    Math.min(n - 1, Math.floor((o + size - 1) / view.tilePx));
  const tiles: TileAddress[] = [];
  for (let y = first(view.originY); y <= last(view.originY, view.height); y++) {
    for (let x = first(view.originX); x <= last(view.originX, view.width); x++) {
      tiles.push({ z: view.zoom, x, y });
    }
  }
  return tiles;
}

/** Pan offset that centers the zoom's tile square in the container. */
export function centeredOrigin(
  width: number,
  height: number,
  zoom: number,
  tilePx: number,
): { originX: number; originY: number } {
  const canvas = tilePx * 2 ** zoom;
  return {
    originX: (canvas - width) / 2,
    originY: (canvas - height) / 2,
  };
}

interface LayerSpec {
  template: string | null;
  maxZoom: number;
  opacity: number;
  onTileError?: (t: TileAddress) => void;
}

class Layer {
  readonly el: HTMLDivElement;
  spec: LayerSpec = { template: null, maxZoom: 0, opacity: 1 };
  private imgs = new Map<string, HTMLImageElement>();

  constructor(className: string) {
    this.el = document.createElement("div");
    this.el.className = `layer ${className}`;
  }

  render(view: Viewport): void {
    const { template, maxZoom, opacity } = this.spec;
    this.el.style.opacity = String(opacity);
    if (template === null) {
      this.clear();
      return;
    }
    // draw at the layer's deepest available level, upscaled as needed
    const z = Math.min(view.zoom, maxZoom);
    const scale = 2 ** (view.zoom - z);
    const wanted = new Map<string, TileAddress>();
    for (const t of visibleTiles({ ...view, zoom: view.zoom })) {
      const src = { z, x: Math.floor(t.x / scale), y: Math.floor(t.y / scale) };
      wanted.set(`${src.z}/${src.x}/${src.y}`, src);
    }
    for (const [key, img] of this.imgs) {
      if (!wanted.has(key)) {
        img.remove();
        this.imgs.delete(key);
      }
    }
    const size = view.tilePx * scale;
    for (const [key, t] of wanted) {
      let img = this.imgs.get(key);
      if (!img) {
        img = document.createElement("img");
        img.draggable = false;
        img.src = tileUrl(template, t);
        img.onerror = () => {
          img!.style.visibility = "hidden"; // behave as a transparent tile
          this.spec.onTileError?.(t);
        };
        this.imgs.set(key, img);
        this.el.appendChild(img);
      }
      img.style.width = `${size}px`;
      img.style.height = `${size}px`;
      img.style.transform = `translate(${t.x * size - view.originX}px, ${
        t.y * size - view.originY
      }px)`;
    }
  }

  clear(): void {
    for (const img of this.imgs.values()) img.remove();
    this.imgs.clear();
  }
}

export class TileMap {
  readonly base = new Layer("base");
  readonly overlay = new Layer("overlay");
  private readonly container: HTMLElement;
  private view: Viewport;
  private maxZoom = 0;

  constructor(container: HTMLElement, tilePx: number) {
    this.container = container;
    container.classList.add("tilemap");
    container.appendChild(this.base.el);
    container.appendChild(this.overlay.el);
    this.view = {
      width: container.clientWidth || 800,
      height: container.clientHeight || 500,
      originX: 0,
      originY: 0,
      zoom: 0,
      tilePx,
    };
    this.bindPan();
  }

  /** Swap datasets: new base template, reset zoom/pan. */
  setBase(template: string, maxZoom: number): void {
    this.maxZoom = maxZoom;
    this.base.spec = { template, maxZoom, opacity: 1 };
    this.base.clear();
    this.setZoom(0, true);
  }

  setOverlay(
    template: string | null,
    maxZoom: number,
    onTileError?: (t: TileAddress) => void,
  ): void {
    const opacity = this.overlay.spec.opacity;
    this.overlay.spec = { template, maxZoom, opacity, onTileError };
    this.overlay.clear();
    this.render();
  }

  setOverlayOpacity(opacity: number): void {
    this.overlay.spec.opacity = opacity;
    this.overlay.el.style.opacity = String(opacity);
  }

  get zoom(): number {
    return this.view.zoom;
  }

  zoomIn(): void {
    this.setZoom(this.view.zoom + 1);
  }

  zoomOut(): void {
    this.setZoom(this.view.zoom - 1);
  }

  private setZoom(z: number, recenter = false): void {
    const zoom = Math.min(Math.max(z, 0), this.maxZoom);
    if (!recenter && zoom === this.view.zoom) return;
    const { width, height, tilePx } = this.view;
    if (recenter) {
      const { originX, originY } = centeredOrigin(width, height, zoom, tilePx);
      this.view = { ...this.view, zoom, originX, originY };
    } else {
      // keep the container center fixed while the canvas doubles/halves
      const factor = 2 ** (zoom - this.view.zoom);
      const cx = this.view.originX + width / 2;
      const cy = this.view.originY + height / 2;
      this.view = {
        ...this.view,
        zoom,
        originX: cx * factor - width / 2,
        originY: cy * factor - height / 2,
      };
    }
    this.render();
  }

  private bindPan(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.container.addEventListener("pointerdown", (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
      this.container.setPointerCapture(e.pointerId);
    });
    this.container.addEventListener("pointermove", (e) => {
      if (!dragging) return;
      this.view.originX -= e.clientX - lastX;
      this.view.originY -= e.clientY - lastY;
      lastX = e.clientX;
      lastY = e.clientY;
      this.render();
    });
    this.container.addEventListener("pointerup", () => {
      dragging = false;
    });
    this.container.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.setZoom(this.view.zoom + (e.deltaY < 0 ? 1 : -1));
    });
  }

  render(): void {
    this.view.width = this.container.clientWidth || this.view.width;
    this.view.height = this.container.clientHeight || this.view.height;
    this.base.render(this.view);
    this.overlay.render(this.view);
  }
}
