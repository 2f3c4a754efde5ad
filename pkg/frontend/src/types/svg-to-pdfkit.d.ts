declare module "svg-to-pdfkit" {
  const SVGtoPDF: (doc: unknown, svg: string, x?: number, y?: number, options?: object) => void;
  export default SVGtoPDF;
}
